use dualtri::fixtures;
use dualtri::metric::{weighted_to_duality, DualityMetric, MetricStructure};
use dualtri::regularity::{classify_hinges, is_edge_positive, random_unit_function};
use dualtri::{regularize, DualGeometry, Execution, LaplaceSystem, RegularizeOptions, SimplicialComplex};
use proptest::prelude::*;

fn surface(vertices: usize, spread: f64, seed: u64) -> (SimplicialComplex, DualityMetric) {
    let doc = fixtures::random_surface(vertices, spread, seed).expect("fixture");
    let MetricStructure::Weighted(w) = &doc.metric else { unreachable!() };
    let d = weighted_to_duality(&doc.complex, w).expect("duality");
    (doc.complex, d)
}

fn energy_on(complex: &SimplicialComplex, metric: &DualityMetric, f: &[f64]) -> f64 {
    let g = DualGeometry::compute(complex, metric).expect("geometry");
    LaplaceSystem::assemble(complex, &g).dirichlet_energy(f).expect("energy")
}

#[test]
fn thin_hinge_flips_once() {
    let doc = fixtures::thin_hinge();
    let d = doc.metric.to_duality(&doc.complex).expect("duality");
    let f = vec![0.0, 0.0, 1.0, 0.0];
    let options = RegularizeOptions { instrumentation: Some(f.clone()), ..RegularizeOptions::default() };
    let r = regularize(&doc.complex, &d, &options).expect("regularize");
    assert_eq!(r.flips.len(), 1);
    assert!(r.flips[0].phi < 0.0);
    assert!(r.final_energy < r.initial_energy);
    assert_eq!(r.flips[0].created_ends, [2, 3]);
    assert!((energy_on(&r.complex, &r.metric, &f) - r.final_energy).abs() <= 1e-12);
}

#[test]
fn regular_input_is_left_alone() {
    let doc = fixtures::icosahedron_boundary();
    let d = doc.metric.to_duality(&doc.complex).expect("duality");
    let r = regularize(&doc.complex, &d, &RegularizeOptions::default()).expect("regularize");
    assert!(r.flips.is_empty());
    assert_eq!(r.metric, d);
    assert_eq!(r.initial_energy, r.final_energy);
}

#[test]
fn flip_cap_is_reported() {
    let (c, d) = surface(30, 0.2, 11);
    let capped = RegularizeOptions { max_flips: Some(1), ..RegularizeOptions::default() };
    let r = regularize(&c, &d, &capped).expect("regularize");
    let free = regularize(&c, &d, &RegularizeOptions::default()).expect("regularize");
    assert!(free.flips.len() > 1, "fixture should need several flips");
    assert!(r.hit_flip_cap);
    assert_eq!(r.flips.len(), 1);
}

#[test]
fn instrumentation_is_seeded() {
    let a = random_unit_function(10, 4);
    assert_eq!(a, random_unit_function(10, 4));
    assert_ne!(a, random_unit_function(10, 5));
    assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn regularization_reaches_a_regular_triangulation(vertices in 6usize..30, seed in 0u64..10_000) {
        let (c, d) = surface(vertices, 0.2, seed);
        prop_assume!(is_edge_positive(&c, &d).expect("positivity").is_positive());
        let r = regularize(&c, &d, &RegularizeOptions { seed, ..RegularizeOptions::default() }).expect("regularize");
        prop_assert!(!r.is_stalled());
        prop_assert!(!r.hit_flip_cap);
        for report in classify_hinges(&r.complex, &r.metric, Execution::Sequential) {
            prop_assert!(report.expect("hinge").is_regular());
        }
        let scale = r.initial_energy.max(1.0);
        for flip in &r.flips {
            prop_assert!(flip.phi <= 0.0);
            prop_assert!(flip.energy_after <= flip.energy_before + 1e-12 * scale);
        }
        let recomputed = energy_on(&r.complex, &r.metric, &r.instrumentation);
        prop_assert!((recomputed - r.final_energy).abs() <= 1e-9 * scale);
        prop_assert_eq!(r.complex.euler_characteristic(), c.euler_characteristic());
        prop_assert_eq!(r.complex.num_tops(), c.num_tops());
    }
}
