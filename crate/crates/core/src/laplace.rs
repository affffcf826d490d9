//! The discrete Laplacian induced by a dual geometry and its solvers.
//!
//! The matrix `L` is stored without the vertex-volume normalization:
//! `L_ij = |★e| / |e|` summed over the edges joining `i` and `j`, and
//! `L_ii = -Σ_j L_ij`. Poisson problems use the measure form `L u = f V`;
//! heat flow uses the pointwise form `du/dt = D⁻¹ L u` with `D = diag(V)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::complex::SimplicialComplex;
use crate::geometry::{triangle_area, DualGeometry};
use crate::metric::DualityMetric;
use crate::par::{self, Execution};

/// Relative tolerance for eigenvalue classification, scaled by `max |L_ii|`.
pub const SPECTRAL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LaplaceError {
    #[error("right-hand side is incompatible: Σ f_i V_i = {sum:e} against ‖f V‖₁ = {norm:e}")]
    IncompatibleRHS { sum: f64, norm: f64 },
    #[error("Laplacian has a {nullity}-dimensional nullspace")]
    SingularBeyondConstants { nullity: usize },
    #[error("dual volume of vertex {vertex} is {volume:e}, not positive")]
    NonpositiveDualVolume { vertex: usize, volume: f64 },
    #[error("explicit step {dt:e} exceeds the stability bound {bound:e}")]
    UnstableStep { dt: f64, bound: f64 },
    #[error("cotangent weights require zero weights (symmetric local lengths); edge {edge} is asymmetric")]
    RequiresZeroWeights { edge: usize },
    #[error("expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("linear solve failed: {0}")]
    Solver(String),
}

/// Symmetric sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Sums duplicate `(row, col, value)` entries; input order fixes the
    /// summation order, so equal inputs give bit-identical matrices.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
            } else {
                cols.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { n, row_ptr, cols, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (self.cols[k], self.values[k]))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(col, _)| col == c).map_or(0.0, |(_, v)| v)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }
}

/// Which sufficient condition for negative semidefiniteness a structure satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    /// Every dual edge volume is positive.
    AllDualEdgesPositive,
    /// A surface whose local lengths are all positive.
    AllLocalLengthsPositive,
    /// A 3-dimensional sphere packing: local lengths depend only on the source vertex.
    SpherePacking3D,
    None,
}

impl Hypothesis {
    pub fn name(self) -> &'static str {
        match self {
            Hypothesis::AllDualEdgesPositive => "all-dual-edges-positive",
            Hypothesis::AllLocalLengthsPositive => "all-local-lengths-positive",
            Hypothesis::SpherePacking3D => "sphere-packing-3d",
            Hypothesis::None => "none",
        }
    }
}

/// Hypotheses satisfied by a structure, in declaration order.
pub fn satisfied_hypotheses(complex: &SimplicialComplex, metric: &DualityMetric, geometry: &DualGeometry) -> Vec<Hypothesis> {
    let mut out = Vec::new();
    let n = complex.dim();
    if n >= 1 && geometry.dual_volumes(1).iter().all(|&v| v > 0.0) {
        out.push(Hypothesis::AllDualEdgesPositive);
    }
    if n == 2 && metric.local.iter().all(|d| d[0] > 0.0 && d[1] > 0.0) {
        out.push(Hypothesis::AllLocalLengthsPositive);
    }
    if n == 3 {
        let mut radius = vec![f64::NAN; complex.num_vertices()];
        let mut packing = true;
        for e in 0..complex.num_edges() {
            let [a, b] = complex.edge_vertices(e);
            for (v, d) in [(a, metric.local[e][0]), (b, metric.local[e][1])] {
                if radius[v].is_nan() {
                    radius[v] = d;
                } else if (radius[v] - d).abs() > 1e-12 * d.abs().max(1.0) {
                    packing = false;
                }
            }
        }
        if packing {
            out.push(Hypothesis::SpherePacking3D);
        }
    }
    out
}

/// Eigenvalue check of negative semidefiniteness with constant nullspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SemidefinitenessReport {
    pub hypothesis: Hypothesis,
    pub hypothesis_holds: bool,
    pub eigenvalues: Vec<f64>,
    pub scale: f64,
    pub max_eigenvalue: f64,
    pub near_zero: usize,
    pub nullspace_is_constant: bool,
}

impl SemidefinitenessReport {
    pub fn pass(&self) -> bool {
        self.max_eigenvalue <= SPECTRAL_TOL * self.scale && self.near_zero == 1 && self.nullspace_is_constant
    }
}

/// A trajectory of heat flow.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl HeatTrajectory {
    /// CSV with one row per time step: `t,u_0,u_1,...`.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, Vec::len);
        let mut out = String::from("t");
        for v in 0..n {
            out.push_str(&format!(",u{v}"));
        }
        out.push('\n');
        for (t, u) in self.times.iter().zip(&self.states) {
            out.push_str(&format!("{t:.16e}"));
            for x in u {
                out.push_str(&format!(",{x:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeatScheme {
    /// Implicit midpoint rule: unconditionally stable, conserves `Σ V_i u_i`.
    #[default]
    ImplicitMidpoint,
    BackwardEuler,
    /// Forward Euler, refused above the stability bound.
    ExplicitEuler,
}

impl HeatScheme {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "implicit-midpoint" | "midpoint" => Some(HeatScheme::ImplicitMidpoint),
            "backward-euler" => Some(HeatScheme::BackwardEuler),
            "explicit-euler" | "explicit" => Some(HeatScheme::ExplicitEuler),
            _ => None,
        }
    }
}

/// An initial condition whose heat flow breaks the maximum principle.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeViolation {
    /// The initial condition is the indicator of this vertex.
    pub vertex: usize,
    pub step: usize,
    pub max_before: f64,
    pub max_after: f64,
    pub min_before: f64,
    pub min_after: f64,
}

type Step = Box<dyn Fn(&DVector<f64>) -> DVector<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceSystem {
    matrix: SparseMatrix,
    volumes: Vec<f64>,
    coefficients: Vec<f64>,
    edge_ends: Vec<[usize; 2]>,
}

fn helmert_basis(n: usize) -> DMatrix<f64> {
    // Orthonormal columns spanning the complement of the constants.
    DMatrix::from_fn(n, n.saturating_sub(1), |r, c| {
        let k = (c + 1) as f64;
        let norm = (k * (k + 1.0)).sqrt();
        if r <= c {
            1.0 / norm
        } else if r == c + 1 {
            -k / norm
        } else {
            0.0
        }
    })
}

/// Smallest eigenvalue of `-½ L` on mean-zero functions, for a dense `L`.
pub fn entropy_of_dense(l: &DMatrix<f64>) -> f64 {
    let n = l.nrows();
    if n < 2 {
        return f64::INFINITY;
    }
    let q = helmert_basis(n);
    let m = q.transpose() * (l * -0.5) * &q;
    let m = (&m + m.transpose()) * 0.5;
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

impl LaplaceSystem {
    pub fn assemble(complex: &SimplicialComplex, geometry: &DualGeometry) -> Self {
        Self::assemble_with(complex, geometry, Execution::default())
    }

    /// Builds `L` from per-top-simplex contributions of every edge.
    pub fn assemble_with(complex: &SimplicialComplex, geometry: &DualGeometry, exec: Execution) -> Self {
        let n = complex.dim();
        let fact: f64 = (1..n).map(|i| i as f64).product();
        let edge_masks: Vec<u32> = (0..=n)
            .flat_map(|a| (a + 1..=n).map(move |b| (1u32 << a) | (1u32 << b)))
            .collect();
        let per_top = par::map_range(exec, complex.num_tops(), |t| {
            let top = geometry.top(t);
            let mut out = Vec::with_capacity(2 * edge_masks.len());
            for &mask in &edge_masks {
                let e = complex.local_face(t, mask).id;
                let [a, b] = complex.edge_vertices(e);
                if a == b {
                    continue;
                }
                let c = top.chains_from(mask) / fact / geometry.edge_length(e);
                out.push((a, b, c));
                out.push((b, a, c));
            }
            out
        });
        let mut triplets: Vec<(usize, usize, f64)> = per_top.into_iter().flatten().collect();
        let nv = complex.num_vertices();
        let mut diag = vec![0.0; nv];
        let mut off = SparseMatrix::from_triplets(nv, std::mem::take(&mut triplets));
        for (r, d) in diag.iter_mut().enumerate() {
            *d = -off.row(r).map(|(_, v)| v).sum::<f64>();
        }
        triplets = (0..nv)
            .flat_map(|r| off.row(r).map(move |(c, v)| (r, c, v)).collect::<Vec<_>>())
            .chain(diag.iter().enumerate().map(|(r, &d)| (r, r, d)))
            .collect();
        off = SparseMatrix::from_triplets(nv, triplets);

        let coefficients = (0..complex.num_edges())
            .map(|e| geometry.dual_volume(1, e) / geometry.edge_length(e))
            .collect();
        let edge_ends = (0..complex.num_edges()).map(|e| complex.edge_vertices(e)).collect();
        Self { matrix: off, volumes: geometry.dual_volumes(0).to_vec(), coefficients, edge_ends }
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn dense(&self) -> DMatrix<f64> {
        self.matrix.to_dense()
    }

    pub fn num_vertices(&self) -> usize {
        self.matrix.dim()
    }

    /// Dual vertex volumes `V_i`.
    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    /// `|★e| / |e|` per edge identifier.
    pub fn edge_coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(f)
    }

    fn check_size(&self, f: &[f64]) -> Result<(), LaplaceError> {
        if f.len() == self.num_vertices() {
            Ok(())
        } else {
            Err(LaplaceError::SizeMismatch { expected: self.num_vertices(), got: f.len() })
        }
    }

    /// `½ Σ_e (|★e| / |e|) (f_j - f_i)²` over edges.
    pub fn dirichlet_energy(&self, f: &[f64]) -> Result<f64, LaplaceError> {
        self.check_size(f)?;
        Ok(self
            .coefficients
            .iter()
            .zip(&self.edge_ends)
            .map(|(c, &[a, b])| 0.5 * c * (f[b] - f[a]).powi(2))
            .sum())
    }

    /// Eigenvalue scale `max_i |L_ii|`.
    pub fn scale(&self) -> f64 {
        (0..self.num_vertices()).map(|i| self.matrix.get(i, i).abs()).fold(0.0, f64::max)
    }

    /// Eigenvalues of `L` in ascending order.
    pub fn spectrum(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.dense()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    fn nullity(&self) -> usize {
        let tol = SPECTRAL_TOL * self.scale();
        self.spectrum().iter().filter(|v| v.abs() <= tol).count()
    }

    /// Solves `L u = f V` with `Σ u_i = 0`.
    pub fn solve_poisson(&self, f: &[f64]) -> Result<Vec<f64>, LaplaceError> {
        self.check_size(f)?;
        let n = self.num_vertices();
        let b: Vec<f64> = f.iter().zip(&self.volumes).map(|(x, v)| x * v).collect();
        let norm: f64 = b.iter().map(|x| x.abs()).sum();
        if norm == 0.0 {
            return Ok(vec![0.0; n]);
        }
        let sum: f64 = b.iter().sum();
        if sum.abs() > 1e-9 * norm {
            return Err(LaplaceError::IncompatibleRHS { sum, norm });
        }
        let nullity = self.nullity();
        if nullity != 1 {
            return Err(LaplaceError::SingularBeyondConstants { nullity });
        }
        // Adding a multiple of 11ᵀ makes the system regular and forces Σu = 0.
        let alpha = self.scale().max(f64::MIN_POSITIVE);
        let a = self.dense().add_scalar(alpha);
        let lu = a.lu();
        let x = lu
            .solve(&DVector::from_column_slice(&b))
            .ok_or_else(|| LaplaceError::Solver("singular system".into()))?;
        let mean = x.sum() / n as f64;
        let u: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let residual: f64 = self.apply(&u).iter().zip(&b).map(|(r, b)| (r - b).powi(2)).sum::<f64>().sqrt();
        let b_norm: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if residual > 1e-9 * b_norm {
            return Err(LaplaceError::Solver(format!("residual {residual:e} above tolerance")));
        }
        Ok(u)
    }

    fn positive_volumes(&self) -> Result<(), LaplaceError> {
        match self.volumes.iter().position(|&v| !(v > 0.0)) {
            Some(vertex) => Err(LaplaceError::NonpositiveDualVolume { vertex, volume: self.volumes[vertex] }),
            None => Ok(()),
        }
    }

    /// Largest explicit Euler step that keeps every update a convex combination.
    pub fn explicit_step_bound(&self) -> Result<f64, LaplaceError> {
        self.positive_volumes()?;
        let worst = (0..self.num_vertices())
            .map(|i| self.matrix.get(i, i).abs() / self.volumes[i])
            .fold(0.0, f64::max);
        Ok(if worst > 0.0 { 1.0 / worst } else { f64::INFINITY })
    }

    /// Integrates `du/dt = D⁻¹ L u` from `u0` up to `t_end` with steps of `dt`
    /// (the last step is shortened to land on `t_end`).
    pub fn heat_evolve(&self, u0: &[f64], t_end: f64, dt: f64, scheme: HeatScheme) -> Result<HeatTrajectory, LaplaceError> {
        self.check_size(u0)?;
        self.positive_volumes()?;
        if !(dt > 0.0) || !(t_end >= 0.0) {
            return Err(LaplaceError::InvalidInput("time step must be positive and end time nonnegative".into()));
        }
        if scheme == HeatScheme::ExplicitEuler {
            let bound = self.explicit_step_bound()?;
            if dt > bound {
                return Err(LaplaceError::UnstableStep { dt, bound });
            }
        }
        let l = self.dense();
        let d = DMatrix::from_diagonal(&DVector::from_column_slice(&self.volumes));
        let stepper = |h: f64| -> Result<Step, LaplaceError> {
            Ok(match scheme {
                HeatScheme::ExplicitEuler => {
                    let inv: Vec<f64> = self.volumes.iter().map(|v| 1.0 / v).collect();
                    let l = l.clone();
                    Box::new(move |u: &DVector<f64>| {
                        let lu = &l * u;
                        DVector::from_fn(u.len(), |i, _| u[i] + h * inv[i] * lu[i])
                    })
                }
                HeatScheme::ImplicitMidpoint => {
                    let lhs = (&d - &l * (h / 2.0)).lu();
                    let rhs = &d + &l * (h / 2.0);
                    Box::new(move |u: &DVector<f64>| lhs.solve(&(&rhs * u)).expect("nonsingular step"))
                }
                HeatScheme::BackwardEuler => {
                    let lhs = (&d - &l * h).lu();
                    let d = d.clone();
                    Box::new(move |u: &DVector<f64>| lhs.solve(&(&d * u)).expect("nonsingular step"))
                }
            })
        };
        let full_steps = ((t_end / dt) * (1.0 - 1e-12)).floor() as usize;
        let remainder = t_end - full_steps as f64 * dt;
        let step = stepper(dt)?;
        let mut u = DVector::from_column_slice(u0);
        let mut times = vec![0.0];
        let mut states = vec![u0.to_vec()];
        for s in 1..=full_steps {
            u = step(&u);
            times.push(s as f64 * dt);
            states.push(u.iter().copied().collect());
        }
        if remainder > 1e-12 * dt {
            u = stepper(remainder)?(&u);
            times.push(t_end);
            states.push(u.iter().copied().collect());
        }
        Ok(HeatTrajectory { times, states })
    }

    /// Searches vertex indicators for a heat flow that raises the maximum or
    /// lowers the minimum, using explicit steps at the stability bound.
    pub fn find_envelope_violation(&self, steps: usize) -> Result<Option<EnvelopeViolation>, LaplaceError> {
        let dt = self.explicit_step_bound()?;
        let dt = if dt.is_finite() { dt } else { 1.0 };
        let tol = 1e-12;
        for vertex in 0..self.num_vertices() {
            let mut u0 = vec![0.0; self.num_vertices()];
            u0[vertex] = 1.0;
            let traj = self.heat_evolve(&u0, dt * steps as f64, dt, HeatScheme::ExplicitEuler)?;
            for (step, w) in traj.states.windows(2).enumerate() {
                let (max_before, min_before) = extrema(&w[0]);
                let (max_after, min_after) = extrema(&w[1]);
                if max_after > max_before + tol || min_after < min_before - tol {
                    return Ok(Some(EnvelopeViolation { vertex, step: step + 1, max_before, max_after, min_before, min_after }));
                }
            }
        }
        Ok(None)
    }

    /// `min { E(f) : Σ f_i² = 1, Σ f_i = 0 }`.
    pub fn entropy_lambda(&self) -> f64 {
        entropy_of_dense(&self.dense())
    }

    pub fn check_semidefiniteness(&self, hypothesis: Hypothesis, hypothesis_holds: bool) -> SemidefinitenessReport {
        let eig = SymmetricEigen::new(self.dense());
        let scale = self.scale();
        let tol = SPECTRAL_TOL * scale;
        let n = self.num_vertices();
        let mut near_zero = 0;
        let mut nullspace_is_constant = true;
        for (k, &ev) in eig.eigenvalues.iter().enumerate() {
            if ev.abs() <= tol {
                near_zero += 1;
                let v = eig.eigenvectors.column(k);
                let along_constant = v.sum().abs() / (n as f64).sqrt();
                nullspace_is_constant &= (along_constant - 1.0).abs() <= 1e-6;
            }
        }
        let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(f64::total_cmp);
        let max_eigenvalue = eigenvalues.last().copied().unwrap_or(0.0);
        SemidefinitenessReport { hypothesis, hypothesis_holds, eigenvalues, scale, max_eigenvalue, near_zero, nullspace_is_constant }
    }

    /// Nonzero entries as `i j value` lines, row by row.
    pub fn to_coordinate_text(&self) -> String {
        let mut out = String::new();
        for r in 0..self.num_vertices() {
            for (c, v) in self.matrix.row(r) {
                out.push_str(&format!("{r} {c} {v:.16e}\n"));
            }
        }
        out
    }
}

fn extrema(u: &[f64]) -> (f64, f64) {
    u.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), &x| (hi.max(x), lo.min(x)))
}

/// `½ (cot α + cot β)` per edge, from the angles opposite it, for a surface
/// with zero weights.
pub fn cotan_weights(complex: &SimplicialComplex, metric: &DualityMetric) -> Result<Vec<f64>, LaplaceError> {
    if complex.dim() != 2 {
        return Err(LaplaceError::InvalidInput("cotangent weights need a surface".into()));
    }
    for (edge, d) in metric.local.iter().enumerate() {
        if (d[0] - d[1]).abs() > 1e-12 * (d[0] + d[1]).abs() {
            return Err(LaplaceError::RequiresZeroWeights { edge });
        }
    }
    let mut w = vec![0.0; complex.num_edges()];
    for t in 0..complex.num_tops() {
        let len = |a: usize, b: usize| metric.edge_length(complex.local_edge(t, a, b).0);
        let (l01, l02, l12) = (len(0, 1), len(0, 2), len(1, 2));
        let area = triangle_area(l01, l02, l12);
        for (o, a, b) in [(0, 1, 2), (1, 0, 2), (2, 0, 1)] {
            let (la, lb, lc) = (len(o, a), len(o, b), len(a, b));
            let cot = (la * la + lb * lb - lc * lc) / (4.0 * area);
            w[complex.local_edge(t, a, b).0] += 0.5 * cot;
        }
    }
    Ok(w)
}
