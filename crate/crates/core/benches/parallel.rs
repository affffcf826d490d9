use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use dualtri::fixtures;
use dualtri::metric::{weighted_to_duality, DualityMetric, MetricStructure};
use dualtri::regularity::classify_hinges;
use dualtri::{DualGeometry, Execution, LaplaceSystem, SimplicialComplex};

const SIZES: [usize; 2] = [500, 4000];
const POLICIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn surface(vertices: usize) -> (SimplicialComplex, DualityMetric) {
    let doc = fixtures::random_surface(vertices, 0.5, 7).expect("fixture");
    let MetricStructure::Weighted(w) = &doc.metric else { unreachable!() };
    let d = weighted_to_duality(&doc.complex, w).expect("duality");
    (doc.complex, d)
}

fn geometry_map(c: &mut Criterion) {
    let mut group = c.benchmark_group("geometry_map");
    for n in SIZES {
        let (complex, metric) = surface(n);
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, n), &exec, |b, &exec| {
                b.iter(|| DualGeometry::compute_with(black_box(&complex), black_box(&metric), exec).unwrap())
            });
        }
    }
    group.finish();
}

fn laplacian_assembly(c: &mut Criterion) {
    let mut group = c.benchmark_group("laplacian_assembly");
    for n in SIZES {
        let (complex, metric) = surface(n);
        let geometry = DualGeometry::compute(&complex, &metric).unwrap();
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, n), &exec, |b, &exec| {
                b.iter(|| LaplaceSystem::assemble_with(black_box(&complex), black_box(&geometry), exec))
            });
        }
    }
    group.finish();
}

fn hinge_classification(c: &mut Criterion) {
    let mut group = c.benchmark_group("hinge_classification");
    for n in SIZES {
        let (complex, metric) = surface(n);
        for (name, exec) in POLICIES {
            group.bench_with_input(BenchmarkId::new(name, n), &exec, |b, &exec| {
                b.iter(|| classify_hinges(black_box(&complex), black_box(&metric), exec))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, geometry_map, laplacian_assembly, hinge_classification);
criterion_main!(benches);
