//! Deterministic example structures.

use std::collections::HashSet;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::complex::{GlueLabel, SimplicialComplex, TopSimplex};
use crate::io::MeshDocument;
use crate::metric::{DualityMetric, EuclideanMetric, MetricStructure, WeightedMetric};

pub const FIXTURE_NAMES: &[&str] = &[
    "flat_torus_grid",
    "tetrahedron_boundary",
    "icosahedron_boundary",
    "thin_hinge",
    "square_hinge",
    "paper_torus",
    "random_surface",
    "sphere_packing_s3",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FixtureError {
    #[error("unknown fixture '{0}'")]
    UnknownFixture(String),
    #[error("invalid fixture parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureParams {
    /// Grid size of `flat_torus_grid`.
    pub k: usize,
    /// Offset of the short local lengths in `paper_torus`.
    pub epsilon: f64,
    /// Vertex count of `random_surface`.
    pub vertices: usize,
    /// Weights of `random_surface` lie in `±spread/2 · (shortest edge)²`.
    pub weight_spread: f64,
    pub seed: u64,
}

impl Default for FixtureParams {
    fn default() -> Self {
        Self { k: 4, epsilon: 0.1, vertices: 20, weight_spread: 0.0, seed: 0 }
    }
}

pub fn generate_fixture(name: &str, p: &FixtureParams) -> Result<MeshDocument, FixtureError> {
    match name {
        "flat_torus_grid" => flat_torus_grid(p.k),
        "tetrahedron_boundary" => Ok(tetrahedron_boundary()),
        "icosahedron_boundary" => Ok(icosahedron_boundary()),
        "thin_hinge" => Ok(thin_hinge()),
        "square_hinge" => Ok(square_hinge()),
        "paper_torus" => paper_torus(p.epsilon),
        "random_surface" => random_surface(p.vertices, p.weight_spread, p.seed),
        "sphere_packing_s3" => Ok(sphere_packing_s3()),
        _ => Err(FixtureError::UnknownFixture(name.to_string())),
    }
}

fn euclidean(complex: SimplicialComplex, length: impl Fn(usize, usize) -> f64) -> MeshDocument {
    let lengths = (0..complex.num_edges())
        .map(|e| {
            let [a, b] = complex.edge_vertices(e);
            length(complex.vertex_label(a), complex.vertex_label(b))
        })
        .collect();
    MeshDocument::new(complex, MetricStructure::Euclidean(EuclideanMetric::new(lengths)))
}

fn from_points(dim: usize, tops: &[Vec<usize>], points: &[Vector3<f64>]) -> MeshDocument {
    let complex = SimplicialComplex::from_tuples(dim, tops).expect("fixture complex is valid");
    euclidean(complex, |a, b| (points[a] - points[b]).norm())
}

/// `k × k` grid of unit squares on the square flat torus of side `k`, each
/// square cut along the same diagonal.
pub fn flat_torus_grid(k: usize) -> Result<MeshDocument, FixtureError> {
    if k < 3 {
        return Err(FixtureError::InvalidParameter("flat_torus_grid needs k ≥ 3".into()));
    }
    let id = |i: usize, j: usize| (i % k) * k + (j % k);
    let mut tops = Vec::new();
    for i in 0..k {
        for j in 0..k {
            tops.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            tops.push(vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let complex = SimplicialComplex::from_tuples(2, &tops).expect("grid is a simplicial torus");
    Ok(euclidean(complex, |a, b| {
        let step = |x: usize, y: usize| usize::from(!(x + k - y).is_multiple_of(k));
        if step(a / k, b / k) + step(a % k, b % k) == 2 {
            2f64.sqrt()
        } else {
            1.0
        }
    }))
}

pub fn tetrahedron_boundary() -> MeshDocument {
    let complex = SimplicialComplex::from_tuples(2, &[vec![0, 1, 2], vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]])
        .expect("tetrahedron boundary is valid");
    euclidean(complex, |_, _| 1.0)
}

/// Regular icosahedron with unit edges.
pub fn icosahedron_boundary() -> MeshDocument {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut points = Vec::new();
    for s in [-1.0, 1.0] {
        for t in [-1.0, 1.0] {
            points.push(Vector3::new(0.0, s, t * phi));
            points.push(Vector3::new(s, t * phi, 0.0));
            points.push(Vector3::new(t * phi, 0.0, s));
        }
    }
    let points: Vec<_> = points.into_iter().map(|p| p / 2.0).collect();
    let near = |a: usize, b: usize| ((points[a] - points[b]).norm() - 1.0).abs() < 1e-9;
    let mut tops = Vec::new();
    for a in 0..12 {
        for b in a + 1..12 {
            for c in b + 1..12 {
                if near(a, b) && near(a, c) && near(b, c) {
                    tops.push(vec![a, b, c]);
                }
            }
        }
    }
    from_points(2, &tops, &points)
}

/// Points `A=(0,0)`, `B=(1,0)`, `C=(½,0.1)`, `D=(½,-0.1)` with triangles
/// `ABC`, `ABD`: a hinge that is not Delaunay.
pub fn thin_hinge() -> MeshDocument {
    let p = [[0.0, 0.0], [1.0, 0.0], [0.5, 0.1], [0.5, -0.1]].map(|[x, y]| Vector3::new(x, y, 0.0));
    from_points(2, &[vec![0, 1, 2], vec![0, 1, 3]], &p)
}

/// The unit square cut along the diagonal from `(0,0)` to `(1,1)`.
pub fn square_hinge() -> MeshDocument {
    let p = [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]].map(|[x, y]| Vector3::new(x, y, 0.0));
    from_points(2, &[vec![0, 1, 2], vec![0, 1, 3]], &p)
}

/// One-vertex torus from two unit equilateral triangles, with local lengths
/// `ε, 1-ε` on two sides and `½, ½` on the third. Each triangle is
/// compatible but the weights cannot be consistent around the torus.
pub fn paper_torus(epsilon: f64) -> Result<MeshDocument, FixtureError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(FixtureError::InvalidParameter("paper_torus needs 0 < ε < 1".into()));
    }
    let complex = SimplicialComplex::build(
        2,
        vec![
            TopSimplex::glued(vec![1, 3, 2], vec![GlueLabel::new("b"), GlueLabel::new("c"), GlueLabel::new("a")]),
            TopSimplex::glued(vec![1, 4, 2], vec![GlueLabel::new("a"), GlueLabel::new("c"), GlueLabel::new("b")]),
        ],
    )
    .expect("torus gluing is valid");
    let mut local = vec![[0.0; 2]; complex.num_edges()];
    // Corners 1, 3, 2 of the first triangle.
    for (a, b, from_a, from_b) in [(0, 1, epsilon, 1.0 - epsilon), (0, 2, epsilon, 1.0 - epsilon), (1, 2, 0.5, 0.5)] {
        let (e, fwd) = complex.local_edge(0, a, b);
        local[e] = if fwd { [from_a, from_b] } else { [from_b, from_a] };
    }
    Ok(MeshDocument::new(complex, MetricStructure::Duality(DualityMetric::new(local))))
}

/// Boundary of the 4-dimensional cross-polytope, a triangulated 3-sphere, as
/// a sphere packing: `d_ij = r_i`. Vertex `2q` is `+e_q`, `2q+1` is `-e_q`.
pub fn sphere_packing_s3() -> MeshDocument {
    const RADII: [f64; 8] = [1.0, 1.2, 0.9, 1.1, 1.05, 0.95, 1.15, 0.85];
    let tops: Vec<Vec<usize>> = (0..16u32).map(|m| (0..4).map(|q| 2 * q + ((m >> q) & 1) as usize).collect()).collect();
    let complex = SimplicialComplex::from_tuples(3, &tops).expect("cross-polytope boundary is valid");
    let local = (0..complex.num_edges())
        .map(|e| {
            let [a, b] = complex.edge_vertices(e);
            [RADII[complex.vertex_label(a)], RADII[complex.vertex_label(b)]]
        })
        .collect();
    MeshDocument::new(complex, MetricStructure::Duality(DualityMetric::new(local)))
}

/// Random triangulated sphere with chordal edge lengths from points on the
/// unit sphere: repeated triangle subdivision followed by random flips that
/// keep the complex simplicial and the triangles well shaped.
pub fn random_surface(vertices: usize, weight_spread: f64, seed: u64) -> Result<MeshDocument, FixtureError> {
    if vertices < 4 {
        return Err(FixtureError::InvalidParameter("random_surface needs at least 4 vertices".into()));
    }
    if !(weight_spread >= 0.0 && weight_spread.is_finite()) {
        return Err(FixtureError::InvalidParameter("weight spread must be finite and nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<Vector3<f64>> =
        [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]].iter().map(|&[x, y, z]| Vector3::new(x, y, z).normalize()).collect();
    let mut tris: Vec<[usize; 3]> = vec![[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];
    while points.len() < vertices {
        let t = rng.random_range(0..tris.len());
        let [a, b, c] = tris[t];
        let mut bary = [0.0; 3];
        for x in &mut bary {
            *x = 1.0 / 3.0 + rng.random_range(-0.15..0.15);
        }
        let p = (points[a] * bary[0] + points[b] * bary[1] + points[c] * bary[2]).normalize();
        let v = points.len();
        points.push(p);
        tris[t] = [a, b, v];
        tris.push([a, c, v]);
        tris.push([b, c, v]);
    }
    let well_shaped = |p: &[Vector3<f64>], [a, b, c]: [usize; 3]| {
        let area = (p[b] - p[a]).cross(&(p[c] - p[a])).norm() / 2.0;
        let longest = [(a, b), (a, c), (b, c)].iter().map(|&(x, y)| (p[x] - p[y]).norm_squared()).fold(0.0, f64::max);
        area > 0.1 * longest
    };
    for _ in 0..2 * vertices {
        let t = rng.random_range(0..tris.len());
        let s = rng.random_range(0..3);
        let (a, b) = (tris[t][(s + 1) % 3], tris[t][(s + 2) % 3]);
        let k = tris[t][s];
        let Some(u) = (0..tris.len()).find(|&u| u != t && tris[u].contains(&a) && tris[u].contains(&b)) else {
            continue;
        };
        let l = tris[u].iter().copied().find(|&x| x != a && x != b).expect("third corner");
        let edges: HashSet<(usize, usize)> =
            tris.iter().flat_map(|tr| [(tr[0], tr[1]), (tr[0], tr[2]), (tr[1], tr[2])]).map(|(x, y)| (x.min(y), x.max(y))).collect();
        if edges.contains(&(k.min(l), k.max(l))) {
            continue;
        }
        let (n1, n2) = ([k, l, a], [k, l, b]);
        if well_shaped(&points, n1) && well_shaped(&points, n2) {
            tris[t] = n1;
            tris[u] = n2;
        }
    }
    let tops: Vec<Vec<usize>> = tris.iter().map(|t| t.to_vec()).collect();
    let doc = from_points(2, &tops, &points);
    let lengths = doc.metric.lengths(&doc.complex).expect("euclidean lengths");
    let shortest = lengths.iter().copied().fold(f64::INFINITY, f64::min);
    let weights = (0..doc.complex.num_vertices()).map(|_| weight_spread * shortest * shortest * rng.random_range(-0.5..0.5)).collect();
    Ok(MeshDocument::new(doc.complex, MetricStructure::Weighted(WeightedMetric::new(lengths, weights))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::DualGeometry;

    #[test]
    fn all_fixtures_are_valid() {
        for name in FIXTURE_NAMES {
            let doc = generate_fixture(name, &FixtureParams::default()).unwrap();
            doc.metric.validate(&doc.complex).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(matches!(generate_fixture("cube", &FixtureParams::default()), Err(FixtureError::UnknownFixture(_))));
    }

    #[test]
    fn fixture_shapes() {
        let ico = icosahedron_boundary();
        assert_eq!((ico.complex.num_vertices(), ico.complex.num_edges(), ico.complex.num_tops()), (12, 30, 20));
        let grid = flat_torus_grid(4).unwrap();
        assert_eq!(grid.complex.euler_characteristic(), 0);
        assert_eq!(grid.complex.num_vertices(), 16);
        let s3 = sphere_packing_s3();
        assert_eq!((s3.complex.num_vertices(), s3.complex.num_edges(), s3.complex.num_tops()), (8, 24, 16));
        assert!(s3.complex.is_closed());
        let torus = paper_torus(0.1).unwrap();
        assert_eq!(torus.complex.num_vertices(), 1);
    }

    #[test]
    fn random_surface_is_a_deterministic_sphere() {
        let a = random_surface(30, 0.5, 7).unwrap();
        let b = random_surface(30, 0.5, 7).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(a.complex.num_vertices(), 30);
        assert_eq!(a.complex.euler_characteristic(), 2);
        let d = a.metric.to_duality(&a.complex).unwrap();
        assert!(d.local.iter().all(|x| x[0] > 0.0 && x[1] > 0.0));
        assert_ne!(a.to_text(), random_surface(30, 0.5, 8).unwrap().to_text());
    }

    #[test]
    fn square_hinge_diagonal_has_no_dual() {
        let doc = square_hinge();
        let d = doc.metric.to_duality(&doc.complex).unwrap();
        let g = DualGeometry::compute(&doc.complex, &d).unwrap();
        let diag = doc.complex.simplices(1).iter().position(|s| s.vertices == vec![0, 1]).unwrap();
        assert!(g.dual_volume(1, diag).abs() < 1e-15);
    }
}
