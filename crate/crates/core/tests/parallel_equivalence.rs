use dualtri::fixtures;
use dualtri::metric::{weighted_to_duality, MetricStructure};
use dualtri::regularity::classify_hinges;
use dualtri::{DualGeometry, Execution, LaplaceSystem};

#[test]
fn sequential_and_parallel_kernels_agree() {
    for seed in 0..5 {
        let doc = fixtures::random_surface(60, 0.5, seed).expect("fixture");
        let MetricStructure::Weighted(w) = &doc.metric else { unreachable!() };
        let d = weighted_to_duality(&doc.complex, w).expect("duality");

        let gs = DualGeometry::compute_with(&doc.complex, &d, Execution::Sequential).expect("geometry");
        let gp = DualGeometry::compute_with(&doc.complex, &d, Execution::Parallel).expect("geometry");
        for k in 0..=2 {
            assert_eq!(gs.simplex_volumes(k), gp.simplex_volumes(k));
            assert_eq!(gs.dual_volumes(k), gp.dual_volumes(k));
        }

        let ls = LaplaceSystem::assemble_with(&doc.complex, &gs, Execution::Sequential);
        let lp = LaplaceSystem::assemble_with(&doc.complex, &gp, Execution::Parallel);
        assert_eq!(ls.matrix(), lp.matrix());
        assert_eq!(ls.volumes(), lp.volumes());

        let cs: Vec<_> = classify_hinges(&doc.complex, &d, Execution::Sequential)
            .into_iter()
            .map(|r| r.expect("hinge").margin)
            .collect();
        let cp: Vec<_> = classify_hinges(&doc.complex, &d, Execution::Parallel)
            .into_iter()
            .map(|r| r.expect("hinge").margin)
            .collect();
        assert_eq!(cs, cp);
    }
}
