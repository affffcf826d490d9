//! Acceptance run: one pass/fail line per criterion.
//!
//! Runs without the libtest harness so the report is always printed. Set
//! `UPDATE_GOLDEN=1` to rewrite the golden meshes.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::{dvector, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dualtri::fixtures::{self, FixtureParams, FIXTURE_NAMES};
use dualtri::geometry::{DualGeometry, HingeEmbedding};
use dualtri::io::{parse_mesh, MeshDocument};
use dualtri::laplace::{cotan_weights, HeatScheme, Hypothesis, LaplaceError, LaplaceSystem};
use dualtri::metric::{
    duality_to_weighted, thurston_to_weighted, weighted_to_duality, weighted_to_thurston, DualityMetric, MetricError,
    MetricStructure, WeightedMetric, COMPATIBILITY_TOL,
};
use dualtri::regularity::{flip_edge, hinge_regularity, is_edge_positive, regularize, flip_energy_change, RegularizeOptions};
use dualtri::SimplicialComplex;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn weighted_surface(vertices: usize, spread: f64, seed: u64) -> (SimplicialComplex, WeightedMetric) {
    let doc = fixtures::random_surface(vertices, spread, seed).expect("fixture");
    match doc.metric {
        MetricStructure::Weighted(w) => (doc.complex, w),
        _ => unreachable!("random surfaces are weighted"),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn volume_identity() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let (c, w) = weighted_surface(10 + (seed as usize * 7) % 51, 0.8, seed);
        let d = weighted_to_duality(&c, &w).map_err(|e| e.to_string())?;
        let g = DualGeometry::compute(&c, &d).map_err(|e| e.to_string())?;
        let check = g.total_volume_check();
        worst = worst.max(rel(check.simplex_total, check.dual_vertex_total));
    }
    let elapsed = start.elapsed();
    ensure(worst <= 1e-9, || format!("relative volume gap {worst:e}"))?;
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("worst relative gap {worst:.1e} over 50 surfaces in {elapsed:.2?}"))
}

fn cotangent_consistency() -> Outcome {
    let (mut worst, mut largest) = (0.0f64, 0.0f64);
    for seed in 0..50 {
        let (c, w) = weighted_surface(8 + seed as usize % 40, 0.0, 100 + seed);
        let d = weighted_to_duality(&c, &w).map_err(|e| e.to_string())?;
        let g = DualGeometry::compute(&c, &d).map_err(|e| e.to_string())?;
        let l = LaplaceSystem::assemble(&c, &g);
        let cot = cotan_weights(&c, &d).map_err(|e| e.to_string())?;
        for (a, b) in cot.iter().zip(l.edge_coefficients()) {
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
            largest = largest.max(a.abs());
        }
    }
    ensure(worst <= 1e-12, || format!("coefficient gap {worst:e} (largest coefficient {largest:.1})"))?;
    Ok(format!("max |coefficient - ½(cot+cot)| / max(1, |½(cot+cot)|) = {worst:.1e} over 50 surfaces"))
}

fn conversion_round_trips() -> Outcome {
    let (mut wt, mut dwd, mut wdw) = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..30 {
        let (c, w) = weighted_surface(6 + seed as usize, 1.5, 200 + seed);
        let t = weighted_to_thurston(&c, &w).map_err(|e| e.to_string())?;
        let back = thurston_to_weighted(&c, &t).map_err(|e| e.to_string())?;
        for (a, b) in w.lengths().iter().zip(back.lengths()) {
            wt = wt.max(rel(*a, *b));
        }
        for (a, b) in w.weights.iter().zip(&back.weights) {
            wt = wt.max((a - b).abs());
        }

        let d = weighted_to_duality(&c, &w).map_err(|e| e.to_string())?;
        let recovered = duality_to_weighted(&c, &d, 0, 0.0, COMPATIBILITY_TOL).map_err(|e| e.to_string())?;
        let again = weighted_to_duality(&c, &recovered).map_err(|e| e.to_string())?;
        for (a, b) in d.local.iter().zip(&again.local) {
            dwd = dwd.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
        }
        let shift = recovered.weights[0] - w.weights[0];
        for (a, b) in recovered.weights.iter().zip(&w.weights) {
            wdw = wdw.max((a - b - shift).abs());
        }
    }
    ensure(wt <= 1e-12, || format!("weighted↔Thurston gap {wt:e}"))?;
    ensure(dwd <= 1e-10, || format!("duality→weighted→duality gap {dwd:e}"))?;
    ensure(wdw <= 1e-10, || format!("weights differ by more than a constant: {wdw:e}"))?;
    Ok(format!("gaps {wt:.1e} / {dwd:.1e} / {wdw:.1e} over 30 surfaces"))
}

fn loop_obstruction() -> Outcome {
    let torus = fixtures::paper_torus(0.1).map_err(|e| e.to_string())?;
    let MetricStructure::Duality(d) = &torus.metric else { return Err("torus is not a duality structure".into()) };
    let residual = match duality_to_weighted(&torus.complex, d, 0, 0.0, COMPATIBILITY_TOL) {
        Err(MetricError::LoopObstruction { worst, .. }) => worst.residual.abs(),
        other => return Err(format!("expected a loop obstruction, got {other:?}")),
    };
    ensure((residual - 0.8).abs() <= 1e-12, || format!("residual {residual}"))?;
    let mut converted = 0;
    let mut docs: Vec<(String, MeshDocument)> = ["tetrahedron_boundary", "icosahedron_boundary", "thin_hinge", "square_hinge", "sphere_packing_s3"]
        .iter()
        .map(|n| (n.to_string(), fixtures::generate_fixture(n, &FixtureParams::default()).expect("fixture")))
        .collect();
    for seed in 0..10 {
        docs.push((format!("random_surface/{seed}"), fixtures::random_surface(20, 0.5, seed).expect("fixture")));
    }
    for (name, doc) in &docs {
        let d = doc.metric.to_duality(&doc.complex).map_err(|e| format!("{name}: {e}"))?;
        duality_to_weighted(&doc.complex, &d, 0, 0.0, COMPATIBILITY_TOL).map_err(|e| format!("{name}: {e}"))?;
        converted += 1;
    }
    Ok(format!("torus residual {residual:.15}; {converted} simply connected fixtures convert"))
}

fn random_hinge_2d(rng: &mut ChaCha8Rng, convex: bool, spread: f64) -> HingeEmbedding {
    let (lo, hi) = if convex { (0.2, 0.8) } else { (-0.5, 1.5) };
    let points = vec![
        dvector![0.0, 0.0],
        dvector![1.0, 0.0],
        dvector![rng.random_range(lo..hi), rng.random_range(0.05..1.0)],
        dvector![rng.random_range(lo..hi), -rng.random_range(0.05..1.0)],
    ];
    let w: Vec<f64> = (0..4).map(|_| rng.random_range(-spread..spread)).collect();
    HingeEmbedding::from_weighted_points(points, &w)
}

fn random_hinge_3d(rng: &mut ChaCha8Rng) -> HingeEmbedding {
    let mut apex = |sign: f64| {
        dvector![rng.random_range(-0.3..1.3), rng.random_range(-0.3..1.3), sign * rng.random_range(0.05..1.0)]
    };
    let (a1, a2) = (apex(1.0), apex(-1.0));
    let c = dvector![rng.random_range(0.0..1.0), rng.random_range(0.3..1.0), 0.0];
    let points: Vec<DVector<f64>> = vec![dvector![0.0, 0.0, 0.0], dvector![1.0, 0.0, 0.0], c, a1, a2];
    let w: Vec<f64> = (0..5).map(|_| rng.random_range(-0.1..0.1)).collect();
    HingeEmbedding::from_weighted_points(points, &w)
}

fn regularity_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut counts = [[0usize; 2]; 2];
    for (dim, total) in [(0, 1000), (1, 200)] {
        let mut done = 0;
        while done < total {
            let h = if dim == 0 { random_hinge_2d(&mut rng, false, 0.1) } else { random_hinge_3d(&mut rng) };
            let r = hinge_regularity(&h).map_err(|e| e.to_string())?;
            if r.margin.abs() <= 1e-10 {
                continue;
            }
            done += 1;
            let power = r.power_margins.map(|m| m > 0.0);
            ensure(power[0] == (r.margin > 0.0) && power[1] == (r.margin > 0.0), || {
                format!("{}D hinge disagrees: margin {:e}, power margins {:?}", dim + 2, r.margin, r.power_margins)
            })?;
            counts[dim][usize::from(r.margin > 0.0)] += 1;
        }
    }
    Ok(format!(
        "2D: {} regular / {} not; 3D: {} regular / {} not; tests agree on all",
        counts[0][1], counts[0][0], counts[1][1], counts[1][0]
    ))
}

fn energy_factorization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut regularizing = 0;
    for _ in 0..1000 {
        let h = random_hinge_2d(&mut rng, true, 0.05);
        let before = hinge_regularity(&h).map_err(|e| e.to_string())?;
        let after = hinge_regularity(&flip_edge(&h).map_err(|e| e.to_string())?.hinge).map_err(|e| e.to_string())?;
        for _ in 0..5 {
            let f = [(); 4].map(|_| rng.random_range(-1.0..1.0));
            let r = flip_energy_change(&h, f).map_err(|e| e.to_string())?;
            let scale = r.direct.abs().max(r.factorized.abs());
            if scale > 1e-14 {
                worst = worst.max((r.direct - r.factorized).abs() / scale);
            }
            if before.margin.abs() > 1e-10 {
                let regularizes = before.margin < 0.0 && after.margin > 0.0;
                ensure((r.phi < 0.0) == regularizes, || {
                    format!("Φ = {:e} but margins before/after {:e}/{:e}", r.phi, before.margin, after.margin)
                })?;
            }
        }
        if before.margin < 0.0 {
            regularizing += 1;
        }
    }
    ensure(worst <= 1e-9, || format!("relative gap {worst:e}"))?;
    Ok(format!("worst relative gap {worst:.1e} over 5000 cases; {regularizing} regularizing flips, sign of Φ matches"))
}

fn edge_positive_surface(seed: &mut u64, vertices: usize) -> (SimplicialComplex, DualityMetric) {
    loop {
        let (c, w) = weighted_surface(vertices, 0.3, *seed);
        *seed += 1;
        let d = weighted_to_duality(&c, &w).expect("conversion");
        if is_edge_positive(&c, &d).map(|r| r.is_positive()).unwrap_or(false) {
            return (c, d);
        }
    }
}

fn flip_algorithm() -> Outcome {
    let start = Instant::now();
    let mut seed = 1000;
    let mut flips = 0;
    let mut min_margin = f64::INFINITY;
    for i in 0..50 {
        let (c, d) = edge_positive_surface(&mut seed, 8 + i % 33);
        let options = RegularizeOptions { seed: i as u64, track_entropy: true, ..RegularizeOptions::default() };
        let r = regularize(&c, &d, &options).map_err(|e| e.to_string())?;
        ensure(!r.is_stalled() && !r.hit_flip_cap, || format!("surface {i}: stalled on {:?}", r.stalled))?;
        ensure(r.min_margin >= -1e-10, || format!("surface {i}: margin {:e}", r.min_margin))?;
        let scale = r.initial_energy.abs().max(1.0);
        for f in &r.flips {
            ensure(f.energy_after <= f.energy_before + 1e-12 * scale, || {
                format!("surface {i}: energy rose {:e} -> {:e}", f.energy_before, f.energy_after)
            })?;
            let (a, b) = (f.entropy_before.unwrap_or(0.0), f.entropy_after.unwrap_or(0.0));
            ensure(b <= a + 1e-10 * a.abs().max(1.0), || format!("surface {i}: entropy rose {a:e} -> {b:e}"))?;
        }
        ensure((r.final_energy - r.final_energy_recomputed).abs() <= 1e-10 * scale, || format!("surface {i}: energy bookkeeping drifted"))?;
        flips += r.flips.len();
        min_margin = min_margin.min(r.min_margin);
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("{flips} flips over 50 surfaces, min final margin {min_margin:.2e}, energy and entropy monotone, {elapsed:.2?}"))
}

fn semidefiniteness() -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let check = |c: &SimplicialComplex, d: &DualityMetric, h: Hypothesis, worst: &mut f64| -> Result<(), String> {
        let g = DualGeometry::compute(c, d).map_err(|e| e.to_string())?;
        let holds = dualtri::laplace::satisfied_hypotheses(c, d, &g).contains(&h);
        ensure(holds, || format!("hypothesis {} does not hold", h.name()))?;
        let report = LaplaceSystem::assemble(c, &g).check_semidefiniteness(h, holds);
        *worst = worst.max(report.max_eigenvalue / report.scale);
        ensure(report.pass(), || {
            format!("{}: max eigenvalue {:e}, near-zero count {}", h.name(), report.max_eigenvalue, report.near_zero)
        })
    };

    let mut seed = 3000;
    let mut positive = 0;
    while positive < 50 {
        let (c, d) = edge_positive_surface(&mut seed, 10 + positive % 30);
        let r = regularize(&c, &d, &RegularizeOptions::default()).map_err(|e| e.to_string())?;
        let g = DualGeometry::compute(&r.complex, &r.metric).map_err(|e| e.to_string())?;
        if g.dual_volumes(1).iter().all(|&v| v > 0.0) {
            check(&r.complex, &r.metric, Hypothesis::AllDualEdgesPositive, &mut worst)?;
            positive += 1;
        }
    }

    let mut non_regular = 0;
    for seed in 0..50 {
        let (c, w) = weighted_surface(10 + seed as usize % 40, 0.6, 4000 + seed);
        let d = weighted_to_duality(&c, &w).map_err(|e| e.to_string())?;
        let g = DualGeometry::compute(&c, &d).map_err(|e| e.to_string())?;
        if g.dual_volumes(1).iter().any(|&v| v < 0.0) {
            non_regular += 1;
        }
        check(&c, &d, Hypothesis::AllLocalLengthsPositive, &mut worst)?;
    }
    ensure(non_regular > 0, || "no non-regular mesh among the positive-local-length samples".into())?;

    let s3 = fixtures::sphere_packing_s3();
    let MetricStructure::Duality(d) = &s3.metric else { return Err("packing is not a duality structure".into()) };
    check(&s3.complex, d, Hypothesis::SpherePacking3D, &mut worst)?;
    Ok(format!("(a) 50 positive-dual meshes, (b) 50 positive-local-length meshes ({non_regular} non-regular), (c) S³ packing; max eigenvalue/scale {worst:.1e}"))
}

fn heat_and_poisson() -> Outcome {
    let mut systems = Vec::new();
    for name in ["tetrahedron_boundary", "icosahedron_boundary"] {
        let doc = fixtures::generate_fixture(name, &FixtureParams::default()).expect("fixture");
        let d = doc.metric.to_duality(&doc.complex).map_err(|e| e.to_string())?;
        systems.push((name.to_string(), doc.complex, d));
    }
    let mut seed = 5000;
    while systems.len() < 8 {
        let (c, d) = edge_positive_surface(&mut seed, 25);
        let r = regularize(&c, &d, &RegularizeOptions::default()).map_err(|e| e.to_string())?;
        systems.push((format!("regularized surface {seed}"), r.complex, r.metric));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut residual, mut drift) = (0.0f64, 0.0f64);
    let mut checked = 0;
    for (name, c, d) in &systems {
        let g = DualGeometry::compute(c, d).map_err(|e| e.to_string())?;
        if !(g.dual_volumes(1).iter().all(|&v| v > 0.0) && g.dual_volumes(0).iter().all(|&v| v > 0.0)) {
            continue;
        }
        checked += 1;
        let l = LaplaceSystem::assemble(c, &g);
        let v = l.volumes();
        let n = v.len();
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = raw.iter().zip(v).map(|(f, v)| f * v).sum::<f64>() / v.iter().sum::<f64>();
        let f: Vec<f64> = raw.iter().map(|x| x - mean).collect();
        let u = l.solve_poisson(&f).map_err(|e| format!("{name}: {e}"))?;
        let lu = l.apply(&u);
        let b_norm = f.iter().zip(v).map(|(f, v)| (f * v).powi(2)).sum::<f64>().sqrt();
        let res = lu.iter().zip(f.iter().zip(v)).map(|(a, (f, v))| (a - f * v).powi(2)).sum::<f64>().sqrt() / b_norm;
        residual = residual.max(res);
        ensure(matches!(l.solve_poisson(&vec![1.0; n]), Err(LaplaceError::IncompatibleRHS { .. })), || {
            format!("{name}: constant right-hand side accepted")
        })?;

        let dt = l.explicit_step_bound().map_err(|e| e.to_string())?;
        let traj = l.heat_evolve(&raw, 40.0 * dt, dt, HeatScheme::ImplicitMidpoint).map_err(|e| e.to_string())?;
        let mass = |u: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let m0 = mass(&raw);
        for w in traj.states.windows(2) {
            drift = drift.max((mass(&w[1]) - m0).abs() / v.iter().sum::<f64>());
            let (hi0, lo0) = extrema(&w[0]);
            let (hi1, lo1) = extrema(&w[1]);
            ensure(hi1 <= hi0 + 1e-12 && lo1 >= lo0 - 1e-12, || format!("{name}: envelope broken"))?;
        }
    }
    ensure(checked >= 4, || format!("only {checked} all-positive fixtures"))?;
    ensure(residual <= 1e-9, || format!("Poisson residual {residual:e}"))?;
    ensure(drift <= 1e-9, || format!("mass drift {drift:e}"))?;
    Ok(format!("{checked} fixtures: Poisson residual {residual:.1e}, mass drift {drift:.1e}, envelopes monotone"))
}

fn extrema(u: &[f64]) -> (f64, f64) {
    u.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(hi, lo), &x| (hi.max(x), lo.min(x)))
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

fn io_round_trips() -> Outcome {
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    let params = FixtureParams { seed: 42, weight_spread: 0.5, ..FixtureParams::default() };
    for name in FIXTURE_NAMES {
        let first = fixtures::generate_fixture(name, &params).map_err(|e| e.to_string())?.to_text();
        let second = fixtures::generate_fixture(name, &params).map_err(|e| e.to_string())?.to_text();
        ensure(first == second, || format!("{name}: generation is not deterministic"))?;
        let reparsed = parse_mesh(&first).map_err(|e| format!("{name}: {e}"))?.to_text();
        ensure(reparsed == first, || format!("{name}: round trip changed the bytes"))?;
        let path = golden_dir().join(format!("{name}.mesh"));
        if update {
            std::fs::create_dir_all(golden_dir()).map_err(|e| e.to_string())?;
            std::fs::write(&path, &first).map_err(|e| e.to_string())?;
        }
        let golden = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        ensure(golden == first, || format!("{name}: differs from {}", path.display()))?;
    }
    Ok(format!("{} fixtures round-trip byte for byte and match their golden files", FIXTURE_NAMES.len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("volume identity", volume_identity),
        ("cotangent consistency", cotangent_consistency),
        ("conversion round trips", conversion_round_trips),
        ("loop obstruction", loop_obstruction),
        ("regularity equivalence", regularity_equivalence),
        ("energy change factorization", energy_factorization),
        ("flip algorithm", flip_algorithm),
        ("semidefiniteness", semidefiniteness),
        ("heat and Poisson", heat_and_poisson),
        ("I/O", io_round_trips),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
