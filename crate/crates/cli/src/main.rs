//! `dualtri` command-line front end.
//!
//! Exit codes: 0 success, 1 validation failure, 2 parse failure, 3 solver failure.

mod report;

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dualtri::fixtures::{self, FixtureError, FixtureParams};
use dualtri::io::{parse_function, write_function};
use dualtri::laplace::{satisfied_hypotheses, HeatScheme, Hypothesis};
use dualtri::metric::{
    duality_to_weighted, thurston_to_weighted, weighted_to_thurston, MetricStructure, WeightedMetric,
    COMPATIBILITY_TOL,
};
use dualtri::{
    parse_mesh, regularize, DualGeometry, GeometryError, LaplaceError, LaplaceSystem, MeshDocument, MeshError,
    MetricError, RegularityError, RegularizeOptions,
};

#[derive(Parser)]
#[command(name = "dualtri", version, about = "Duality triangulations, dual volumes and discrete Laplacians")]
struct Cli {
    /// Relative tolerance for compatibility and loop checks.
    #[arg(long, global = true, default_value_t = COMPATIBILITY_TOL)]
    tolerance: f64,
    /// Write the main result here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a mesh, then print a structural report.
    Validate { mesh: PathBuf },
    /// Convert the metric of a mesh to another structure.
    Convert {
        mesh: PathBuf,
        #[arg(long, value_enum)]
        to: Target,
        /// Vertex whose weight is fixed when recovering weights from local lengths
        /// (default: the first vertex).
        #[arg(long)]
        base_vertex: Option<usize>,
        /// Weight assigned to the base vertex.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        w0: f64,
    },
    /// Report centers and dual volumes.
    Dualize { mesh: PathBuf },
    /// Flip non-regular edges until every hinge is regular.
    Regularize {
        mesh: PathBuf,
        /// Seed of the instrumentation function used when the mesh has none.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_flips: Option<usize>,
        /// CSV of flip index, edge, Φ and energy.
        #[arg(long)]
        energy_log: Option<PathBuf>,
    },
    /// Discrete Laplacian and its equations.
    Laplace {
        #[command(subcommand)]
        action: LaplaceAction,
    },
    /// Print a generated fixture mesh.
    Gen {
        fixture: String,
        #[command(flatten)]
        params: GenParams,
    },
}

#[derive(Subcommand)]
enum LaplaceAction {
    /// Matrix as `i j value` lines.
    Assemble { mesh: PathBuf },
    /// Solve `L u = f V` with zero mean.
    Poisson {
        mesh: PathBuf,
        /// Function file with the right-hand side; defaults to the mesh's function block.
        #[arg(long)]
        rhs: Option<PathBuf>,
    },
    /// Heat flow as a CSV trajectory.
    Heat {
        mesh: PathBuf,
        /// Function file with the initial state; defaults to the mesh's function block.
        #[arg(long)]
        initial: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, value_enum, default_value_t = Scheme::ImplicitMidpoint)]
        scheme: Scheme,
    },
    /// Eigenvalues and the semidefiniteness check.
    Spectrum { mesh: PathBuf },
    /// Smallest Dirichlet energy of a unit mean-zero function.
    Entropy { mesh: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Weighted,
    Thurston,
    Duality,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    ImplicitMidpoint,
    BackwardEuler,
    ExplicitEuler,
}

impl From<Scheme> for HeatScheme {
    fn from(s: Scheme) -> Self {
        match s {
            Scheme::ImplicitMidpoint => HeatScheme::ImplicitMidpoint,
            Scheme::BackwardEuler => HeatScheme::BackwardEuler,
            Scheme::ExplicitEuler => HeatScheme::ExplicitEuler,
        }
    }
}

#[derive(Args)]
struct GenParams {
    /// Grid size of flat_torus_grid.
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Short local length of paper_torus.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Vertex count of random_surface.
    #[arg(long, default_value_t = 20)]
    vertices: usize,
    /// Weight spread of random_surface, in units of the squared shortest edge.
    #[arg(long, default_value_t = 0.0)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Parse(String),
    Solver(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Parse(_) => 2,
            Failure::Solver(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Parse(m) | Failure::Solver(m) => m,
        }
    }
}

impl From<MeshError> for Failure {
    fn from(e: MeshError) -> Self {
        match e {
            MeshError::Parse(e) => Failure::Parse(format!("parse error: {e}")),
            MeshError::Validation(e) => Failure::Validation(format!("validation error: {e}")),
        }
    }
}

impl From<MetricError> for Failure {
    fn from(e: MetricError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<GeometryError> for Failure {
    fn from(e: GeometryError) -> Self {
        Failure::Solver(format!("geometry: {e}"))
    }
}

impl From<RegularityError> for Failure {
    fn from(e: RegularityError) -> Self {
        Failure::Solver(format!("regularize: {e}"))
    }
}

impl From<LaplaceError> for Failure {
    fn from(e: LaplaceError) -> Self {
        Failure::Solver(format!("laplace: {e}"))
    }
}

type Outcome<T> = Result<T, Failure>;

fn read_text(path: &Path) -> Outcome<String> {
    let mut text = String::new();
    let read = if path == Path::new("-") {
        io::stdin().read_to_string(&mut text).map(|_| ())
    } else {
        fs::read_to_string(path).map(|t| text = t)
    };
    read.map_err(|e| Failure::Parse(format!("cannot read {}: {e}", path.display())))?;
    Ok(text)
}

fn load(path: &Path) -> Outcome<MeshDocument> {
    Ok(parse_mesh(&read_text(path)?)?)
}

fn write_file(path: &Path, text: &str) -> Outcome<()> {
    fs::write(path, text).map_err(|e| Failure::Solver(format!("cannot write {}: {e}", path.display())))
}

fn emit(output: Option<&Path>, text: &str) -> Outcome<()> {
    match output {
        Some(path) => write_file(path, text),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Solver(format!("cannot write output: {e}"))),
    }
}

fn function_input(path: Option<&Path>, doc: &MeshDocument, what: &str) -> Outcome<Vec<f64>> {
    match path {
        Some(p) => parse_function(&read_text(p)?, &doc.complex).map_err(|e| Failure::Parse(format!("{}: {e}", p.display()))),
        None => doc
            .function
            .clone()
            .ok_or_else(|| Failure::Parse(format!("no {what} given and the mesh has no function block"))),
    }
}

fn weighted_of(doc: &MeshDocument, base: Option<usize>, w0: f64, tolerance: f64) -> Outcome<WeightedMetric> {
    let c = &doc.complex;
    Ok(match &doc.metric {
        MetricStructure::Euclidean(m) => WeightedMetric::new(m.lengths.clone(), vec![0.0; c.num_vertices()]),
        MetricStructure::Weighted(m) => m.clone(),
        MetricStructure::Thurston(m) => thurston_to_weighted(c, m)?,
        MetricStructure::Duality(m) => {
            let base = match base {
                Some(label) => c
                    .vertex_by_label(label)
                    .ok_or_else(|| Failure::Validation(format!("unknown base vertex {label}")))?,
                None => 0,
            };
            duality_to_weighted(c, m, base, w0, tolerance)?
        }
    })
}

fn laplace_system(doc: &MeshDocument) -> Outcome<(DualGeometry, LaplaceSystem)> {
    let d = doc.metric.to_duality(&doc.complex)?;
    let g = DualGeometry::compute(&doc.complex, &d)?;
    let l = LaplaceSystem::assemble(&doc.complex, &g);
    Ok((g, l))
}

fn run(cli: Cli) -> Outcome<()> {
    let out = cli.output.as_deref();
    match cli.command {
        Command::Validate { mesh } => {
            let doc = load(&mesh)?;
            let (text, ok) = report::validation(&doc, cli.tolerance)?;
            emit(out, &text)?;
            if !ok {
                return Err(Failure::Validation("compatibility check failed".into()));
            }
        }
        Command::Convert { mesh, to, base_vertex, w0 } => {
            let mut doc = load(&mesh)?;
            doc.metric = match to {
                Target::Duality => MetricStructure::Duality(doc.metric.to_duality(&doc.complex)?),
                Target::Weighted => MetricStructure::Weighted(weighted_of(&doc, base_vertex, w0, cli.tolerance)?),
                Target::Thurston => {
                    let w = weighted_of(&doc, base_vertex, w0, cli.tolerance)?;
                    MetricStructure::Thurston(weighted_to_thurston(&doc.complex, &w)?)
                }
            };
            emit(out, &doc.to_text())?;
        }
        Command::Dualize { mesh } => {
            let doc = load(&mesh)?;
            let d = doc.metric.to_duality(&doc.complex)?;
            let g = DualGeometry::compute(&doc.complex, &d)?;
            emit(out, &report::dual_geometry(&doc.complex, &g))?;
        }
        Command::Regularize { mesh, seed, max_flips, energy_log } => {
            let doc = load(&mesh)?;
            let d = doc.metric.to_duality(&doc.complex)?;
            let options = RegularizeOptions {
                max_flips,
                seed,
                instrumentation: doc.function.clone(),
                track_entropy: false,
            };
            let r = regularize(&doc.complex, &d, &options)?;
            if let Some(path) = energy_log {
                write_file(&path, &r.energy_log_csv())?;
            }
            let result = MeshDocument {
                complex: r.complex.clone(),
                metric: MetricStructure::Duality(r.metric.clone()),
                function: doc.function.clone(),
            };
            emit(out, &result.to_text())?;
            eprintln!(
                "flips {}, energy {:.6e} -> {:.6e}, minimum margin {:.3e}",
                r.flips.len(),
                r.initial_energy,
                r.final_energy,
                r.min_margin
            );
            let drift = (r.final_energy - r.final_energy_recomputed).abs();
            if drift > cli.tolerance.max(1e-12) * r.initial_energy.abs().max(1.0) {
                return Err(Failure::Solver(format!("energy bookkeeping drifted by {drift:e}")));
            }
            if r.hit_flip_cap {
                return Err(Failure::Solver(format!("stopped at the flip cap after {} flips", r.flips.len())));
            }
            if r.is_stalled() {
                return Err(Failure::Solver(format!("stalled on non-flippable edges {:?}", r.stalled)));
            }
        }
        Command::Laplace { action } => laplace(action, out)?,
        Command::Gen { fixture, params } => {
            let p = FixtureParams {
                k: params.k,
                epsilon: params.epsilon,
                vertices: params.vertices,
                weight_spread: params.spread,
                seed: params.seed,
            };
            let doc = fixtures::generate_fixture(&fixture, &p).map_err(|e| match e {
                FixtureError::UnknownFixture(_) => Failure::Parse(format!(
                    "{e}; known fixtures: {}",
                    fixtures::FIXTURE_NAMES.join(", ")
                )),
                FixtureError::InvalidParameter(_) => Failure::Validation(e.to_string()),
            })?;
            emit(out, &doc.to_text())?;
        }
    }
    Ok(())
}

fn laplace(action: LaplaceAction, out: Option<&Path>) -> Outcome<()> {
    match action {
        LaplaceAction::Assemble { mesh } => {
            let (_, l) = laplace_system(&load(&mesh)?)?;
            emit(out, &l.to_coordinate_text())
        }
        LaplaceAction::Poisson { mesh, rhs } => {
            let doc = load(&mesh)?;
            let f = function_input(rhs.as_deref(), &doc, "right-hand side")?;
            let (_, l) = laplace_system(&doc)?;
            let u = l.solve_poisson(&f)?;
            emit(out, &write_function(&doc.complex, &u))
        }
        LaplaceAction::Heat { mesh, initial, t_end, dt, scheme } => {
            let doc = load(&mesh)?;
            let u0 = function_input(initial.as_deref(), &doc, "initial state")?;
            let (_, l) = laplace_system(&doc)?;
            let traj = l.heat_evolve(&u0, t_end, dt, scheme.into())?;
            emit(out, &traj.to_csv())
        }
        LaplaceAction::Spectrum { mesh } => {
            let doc = load(&mesh)?;
            let d = doc.metric.to_duality(&doc.complex)?;
            let (g, l) = laplace_system(&doc)?;
            let hypotheses = satisfied_hypotheses(&doc.complex, &d, &g);
            let hypothesis = hypotheses.first().copied().unwrap_or(Hypothesis::None);
            let check = l.check_semidefiniteness(hypothesis, hypothesis != Hypothesis::None);
            emit(out, &report::spectrum(&check, &hypotheses))
        }
        LaplaceAction::Entropy { mesh } => {
            let (_, l) = laplace_system(&load(&mesh)?)?;
            emit(out, &format!("{:.16e}\n", l.entropy_lambda()))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("dualtri: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
