//! Local regularity of hinges, 2→2 flips and the flip algorithm.
//!
//! Hinge predicates work in every dimension through [`HingeEmbedding`]. Flips
//! are executed on surfaces only: [`FlipMesh`] is a mutable working copy of a
//! 2-dimensional complex with its local lengths, and [`regularize`] drives it.

use std::collections::{HashMap, HashSet, VecDeque};

use nalgebra::{dvector, DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::complex::{GlueLabel, Hinge, SimplicialComplex, TopSimplex};
use crate::geometry::{center_offset_2d, DualGeometry, GeometryError, HingeEmbedding};
use crate::laplace;
use crate::metric::{DualityMetric, MetricError};
use crate::par::{self, Execution};

/// Relative width of the band around zero in which a margin counts as a tie.
pub const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegularityError {
    #[error("hinge is not flippable")]
    NotFlippable,
    #[error("flip produces a degenerate triangle: {0}")]
    DegenerateFlip(String),
    #[error("degenerate hinge: {0}")]
    DegenerateHinge(String),
    #[error("operation requires a 2-dimensional complex, got dimension {0}")]
    NotTwoDimensional(usize),
    #[error("edge {0} is not an interior edge between two distinct triangles")]
    NotAHinge(usize),
    #[error("instrumentation function has {got} values for {expected} vertices")]
    InstrumentationSize { got: usize, expected: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// `|x - p|² - w_p`.
pub fn power_distance(x: &DVector<f64>, p: &DVector<f64>, w_p: f64) -> f64 {
    (x - p).norm_squared() - w_p
}

/// Outcome of the two local regularity tests on one hinge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegularityReport {
    /// Signed volume of the dual of the shared facet.
    pub margin: f64,
    /// `π_{C_1}(v_2) - w_{v_2}` and `π_{C_2}(v_1) - w_{v_1}`.
    pub power_margins: [f64; 2],
    /// Size of the tie band for this hinge.
    pub tie_band: f64,
}

impl RegularityReport {
    /// Regular in the non-strict sense: ties count as regular.
    pub fn is_regular(&self) -> bool {
        self.margin >= -self.tie_band
    }

    pub fn is_strict(&self) -> bool {
        self.margin > self.tie_band
    }

    /// At a tie the centers of the two top simplices coincide.
    pub fn centers_coincide(&self) -> bool {
        self.margin.abs() <= self.tie_band
    }

    pub fn power_regular(&self) -> bool {
        self.power_margins[0] > 0.0 && self.power_margins[1] > 0.0
    }

    /// Whether the power test and the dual-volume test agree, ignoring ties.
    pub fn tests_agree(&self) -> bool {
        self.centers_coincide()
            || (self.margin > 0.0) == (self.power_margins[0] > 0.0)
                && (self.margin > 0.0) == (self.power_margins[1] > 0.0)
    }
}

fn hinge_scale(h: &HingeEmbedding) -> f64 {
    let mut s = 0.0f64;
    for a in 0..h.points.len() {
        for b in a + 1..h.points.len() {
            s = s.max(h.length(a, b));
        }
    }
    s
}

/// Both regularity tests on an embedded hinge.
pub fn hinge_regularity(h: &HingeEmbedding) -> Result<RegularityReport, RegularityError> {
    let n = h.dim;
    let w = h.local_weights();
    let c1 = h.top_center(0)?;
    let c2 = h.top_center(1)?;
    let wc1 = power_distance(&c1, &h.points[0], w[0]);
    let wc2 = power_distance(&c2, &h.points[0], w[0]);
    let power_margins = [
        power_distance(&h.points[n + 1], &c1, wc1) - w[n + 1],
        power_distance(&h.points[n], &c2, wc2) - w[n],
    ];
    let margin = h.dual_facet_volume()?;
    let scale = hinge_scale(h);
    Ok(RegularityReport { margin, power_margins, tie_band: TIE_TOL * scale.powi(n as i32 - 1).max(f64::MIN_POSITIVE) })
}

pub fn is_locally_regular(
    complex: &SimplicialComplex,
    metric: &DualityMetric,
    hinge: &Hinge,
) -> Result<RegularityReport, RegularityError> {
    hinge_regularity(&HingeEmbedding::from_complex(complex, metric, hinge)?)
}

/// Regularity of every hinge of the complex, in hinge order.
pub fn classify_hinges(
    complex: &SimplicialComplex,
    metric: &DualityMetric,
    exec: Execution,
) -> Vec<Result<RegularityReport, RegularityError>> {
    let hinges = complex.hinges();
    par::map_slice(exec, &hinges, |h| is_locally_regular(complex, metric, h))
}

fn cross(o: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn require_2d(h: &HingeEmbedding) -> Result<(), RegularityError> {
    if h.dim == 2 {
        Ok(())
    } else {
        Err(RegularityError::NotTwoDimensional(h.dim))
    }
}

/// Whether the quadrilateral `i, k, j, l` of a planar hinge is strictly convex.
///
/// The angles at the apexes are triangle angles, so only the shared edge's
/// endpoints can be reflex; an angle of exactly π counts as not flippable.
pub fn is_flippable(h: &HingeEmbedding) -> bool {
    if h.dim != 2 {
        return false;
    }
    let [i, j, k, l] = [&h.points[0], &h.points[1], &h.points[2], &h.points[3]];
    let oi = cross(k, l, i);
    let oj = cross(k, l, j);
    let band = TIE_TOL * hinge_scale(h).powi(2);
    oi * oj < 0.0 && oi.abs() > band && oj.abs() > band
}

/// Local lengths on the new diagonal `{k, l}`: `[d_kl, d_lk]`.
pub fn flipped_local_lengths(h: &HingeEmbedding) -> [f64; 2] {
    let d = &h.d;
    let (i, j, k, l) = (0, 1, 2, 3);
    let _ = j;
    let dist = h.length(k, l);
    let diff = (d[k][i].powi(2) + d[i][l].powi(2) - d[l][i].powi(2) - d[i][k].powi(2)) / dist;
    [(dist + diff) / 2.0, (dist - diff) / 2.0]
}

/// Result of flipping a planar hinge.
#[derive(Debug, Clone, PartialEq)]
pub struct FlippedHinge {
    /// The new hinge: points `k, l, i, j` with `{k, l}` shared.
    pub hinge: HingeEmbedding,
    pub d_kl: f64,
    pub d_lk: f64,
    pub dual_before: f64,
    pub dual_after: f64,
}

/// Replaces the shared edge `{i, j}` by `{k, l}`, keeping all other local lengths.
pub fn flip_edge(h: &HingeEmbedding) -> Result<FlippedHinge, RegularityError> {
    require_2d(h)?;
    if !is_flippable(h) {
        return Err(RegularityError::NotFlippable);
    }
    let [d_kl, d_lk] = flipped_local_lengths(h);
    let order = [2usize, 3, 0, 1];
    let points: Vec<DVector<f64>> = order.iter().map(|&p| h.points[p].clone()).collect();
    let mut d = vec![vec![f64::NAN; 4]; 4];
    for (a, &pa) in order.iter().enumerate() {
        for (b, &pb) in order.iter().enumerate() {
            if a != b {
                d[a][b] = h.d[pa][pb];
            }
        }
    }
    d[0][1] = d_kl;
    d[1][0] = d_lk;
    d[2][3] = f64::NAN;
    d[3][2] = f64::NAN;
    let scale = hinge_scale(h);
    for apex in [2usize, 3] {
        let area = cross(&points[0], &points[1], &points[apex]).abs() / 2.0;
        if !(area * area > crate::metric::REALIZABILITY_TOL * scale.powi(4)) {
            return Err(RegularityError::DegenerateFlip(format!("new triangle has area {area:e}")));
        }
    }
    let vertices = h.vertices.as_ref().map(|v| order.iter().map(|&p| v[p]).collect());
    let hinge = HingeEmbedding { dim: 2, points, d, vertices };
    let dual_before = h.dual_facet_volume()?;
    let dual_after = hinge.dual_facet_volume()?;
    Ok(FlippedHinge { hinge, d_kl, d_lk, dual_before, dual_after })
}

fn triangle_area(a: &DVector<f64>, b: &DVector<f64>, c: &DVector<f64>) -> f64 {
    cross(a, b, c).abs() / 2.0
}

/// Signed offsets of a triangle's center from its three edges, indexed by the
/// opposite corner, from the closed form in the angles.
fn triangle_offsets(len: impl Fn(usize, usize) -> f64, d: impl Fn(usize, usize) -> f64) -> Result<[f64; 3], GeometryError> {
    let mut out = [0.0; 3];
    for (s, slot) in out.iter_mut().enumerate() {
        let (a, b) = ((s + 1) % 3, (s + 2) % 3);
        *slot = center_offset_2d(len(a, b), len(a, s), len(b, s), d(a, b), d(a, s))?;
    }
    Ok(out)
}

/// Dirichlet energy of `f` restricted to one triangle of a hinge, given by the
/// point indices of its corners.
fn hinge_triangle_energy(h: &HingeEmbedding, tri: [usize; 3], f: &[f64; 4]) -> Result<f64, GeometryError> {
    let off = triangle_offsets(|a, b| h.length(tri[a], tri[b]), |a, b| h.d[tri[a]][tri[b]])?;
    Ok((0..3)
        .map(|s| {
            let (a, b) = (tri[(s + 1) % 3], tri[(s + 2) % 3]);
            0.5 * off[s] / h.length(a, b) * (f[a] - f[b]).powi(2)
        })
        .sum())
}

/// The flip energy factor Φ of a flippable planar hinge.
pub fn flip_energy_factor(h: &HingeEmbedding) -> Result<f64, RegularityError> {
    require_2d(h)?;
    if !is_flippable(h) {
        return Err(RegularityError::DegenerateHinge("quadrilateral is not strictly convex".into()));
    }
    let p = &h.points;
    let w = h.local_weights();
    let a123 = triangle_area(&p[0], &p[1], &p[2]);
    let a124 = triangle_area(&p[0], &p[1], &p[3]);
    let a134 = triangle_area(&p[0], &p[2], &p[3]);
    let a234 = triangle_area(&p[1], &p[2], &p[3]);
    let a1234 = a123 + a124;
    let c = diagonal_intersection(h);
    let r: Vec<f64> = (0..4).map(|a| (&c - &p[a]).norm()).collect();
    let num = (r[2] * r[3] - r[0] * r[1]) * a1234 + w[0] * a234 + w[1] * a134 - w[2] * a124 - w[3] * a123;
    Ok(num / (8.0 * a123 * a134 * a234 * a124))
}

fn diagonal_intersection(h: &HingeEmbedding) -> DVector<f64> {
    let p = &h.points;
    // p_i + s (p_j - p_i) on the line through p_k and p_l.
    let oi = cross(&p[2], &p[3], &p[0]);
    let oj = cross(&p[2], &p[3], &p[1]);
    let s = oi / (oi - oj);
    &p[0] + (&p[1] - &p[0]) * s
}

/// Energy change of a flip computed directly and through the factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipEnergyChange {
    pub direct: f64,
    pub factorized: f64,
    pub phi: f64,
}

/// Energy change `E(after) - E(before)` of flipping the hinge, for `f` given
/// on the points `i, j, k, l`.
pub fn flip_energy_change(h: &HingeEmbedding, f: [f64; 4]) -> Result<FlipEnergyChange, RegularityError> {
    let phi = flip_energy_factor(h)?;
    let flipped = flip_edge(h)?;
    let before = hinge_triangle_energy(h, [0, 1, 2], &f)? + hinge_triangle_energy(h, [0, 1, 3], &f)?;
    let g = &flipped.hinge;
    // Flipped points are k, l, i, j.
    let fg = [f[2], f[3], f[0], f[1]];
    let after = hinge_triangle_energy(g, [0, 1, 2], &fg)? + hinge_triangle_energy(g, [0, 1, 3], &fg)?;

    let p = &h.points;
    let c = diagonal_intersection(h);
    let r: Vec<f64> = (0..4).map(|a| (&c - &p[a]).norm()).collect();
    let l12 = h.length(0, 1);
    let l34 = h.length(2, 3);
    let f_before = r[0] / l12 * f[1] + r[1] / l12 * f[0];
    let f_after = r[2] / l34 * f[3] + r[3] / l34 * f[2];
    let a1234 = triangle_area(&p[0], &p[1], &p[2]) + triangle_area(&p[0], &p[1], &p[3]);
    let factorized = (f_after - f_before).powi(2) * a1234 * a1234 * phi;
    Ok(FlipEnergyChange { direct: after - before, factorized, phi })
}

/// Result of the edge positivity test.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgePositivity {
    /// Directed edges with a nonpositive local length, as `(edge, from_tail)`.
    pub nonpositive: Vec<(usize, bool)>,
    /// Interior edges whose flip would create a nonpositive local length.
    pub nonpositive_after_flip: Vec<usize>,
}

impl EdgePositivity {
    pub fn is_positive(&self) -> bool {
        self.nonpositive.is_empty() && self.nonpositive_after_flip.is_empty()
    }
}

pub fn is_edge_positive(complex: &SimplicialComplex, metric: &DualityMetric) -> Result<EdgePositivity, RegularityError> {
    if complex.dim() != 2 {
        return Err(RegularityError::NotTwoDimensional(complex.dim()));
    }
    let mesh = FlipMesh::new(complex, metric)?;
    Ok(mesh.edge_positivity())
}

/// Simplices whose centers are not strictly inside them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Centrality {
    pub violations: Vec<(usize, usize)>,
}

impl Centrality {
    pub fn is_central(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Tests whether every simplex of dimension `1..=m` contains its center, by
/// barycentric coordinates all above `tolerance`.
pub fn is_m_central(complex: &SimplicialComplex, geometry: &DualGeometry, m: usize, tolerance: f64) -> Centrality {
    let mut violations = Vec::new();
    for k in 1..=m.min(complex.dim()) {
        for id in 0..complex.num_simplices(k) {
            let (t, mask) = complex.first_occurrence(k, id);
            if geometry.top(t).barycentric(mask).iter().any(|&b| b <= tolerance) {
                violations.push((k, id));
            }
        }
    }
    Centrality { violations }
}

#[derive(Debug, Clone, PartialEq)]
struct MeshEdge {
    ends: [usize; 2],
    d: [f64; 2],
    tris: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
struct MeshTri {
    corners: [usize; 3],
    /// Edge opposite each corner.
    edges: [usize; 3],
    /// Whether the edge at slot `s` has its tail at corner `s + 1`.
    aligned: [bool; 3],
}

/// Mutable surface with local lengths, supporting in-place edge flips.
///
/// Edge and triangle identifiers are stable: a flip reuses the identifier of
/// the removed edge for the new one, and the two triangle identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipMesh {
    vertex_labels: Vec<usize>,
    edges: Vec<MeshEdge>,
    tris: Vec<MeshTri>,
    source_index: Vec<usize>,
}

impl FlipMesh {
    pub fn new(complex: &SimplicialComplex, metric: &DualityMetric) -> Result<Self, RegularityError> {
        if complex.dim() != 2 {
            return Err(RegularityError::NotTwoDimensional(complex.dim()));
        }
        if metric.local.len() != complex.num_edges() {
            return Err(MetricError::MissingLocalLength { edge: metric.local.len().min(complex.num_edges()) }.into());
        }
        let mut edges: Vec<MeshEdge> = (0..complex.num_edges())
            .map(|e| MeshEdge { ends: complex.edge_vertices(e), d: metric.local[e], tris: Vec::new() })
            .collect();
        let mut tris = Vec::with_capacity(complex.num_tops());
        for t in 0..complex.num_tops() {
            let corners = [0, 1, 2].map(|c| complex.top_vertex(t, c));
            let mut tri = MeshTri { corners, edges: [0; 3], aligned: [false; 3] };
            for s in 0..3 {
                let (e, fwd) = complex.local_edge(t, (s + 1) % 3, (s + 2) % 3);
                tri.edges[s] = e;
                tri.aligned[s] = fwd;
                edges[e].tris.push((t, s));
            }
            tris.push(tri);
        }
        // Original input position of each top, for writing back.
        let source_index = complex.source_index().to_vec();
        Ok(Self { vertex_labels: complex.vertex_labels().to_vec(), edges, tris, source_index })
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_labels.len()
    }

    pub fn local_lengths(&self, e: usize) -> [f64; 2] {
        self.edges[e].d
    }

    pub fn edge_ends(&self, e: usize) -> [usize; 2] {
        self.edges[e].ends
    }

    fn length(&self, e: usize) -> f64 {
        self.edges[e].d[0] + self.edges[e].d[1]
    }

    /// End index (0 tail, 1 head) of the slot-`s` edge at corner `c` of triangle `t`.
    fn end_at(&self, t: usize, s: usize, c: usize) -> usize {
        let first = (s + 1) % 3;
        usize::from((c == first) != self.tris[t].aligned[s])
    }

    /// Local length at corner `c` of triangle `t` along its slot-`s` edge.
    fn d_at(&self, t: usize, s: usize, c: usize) -> f64 {
        self.edges[self.tris[t].edges[s]].d[self.end_at(t, s, c)]
    }

    /// Edge slot joining corners `a` and `b` of a triangle.
    fn slot(a: usize, b: usize) -> usize {
        3 - a - b
    }

    /// Offsets of the center of triangle `t` from its edges, by slot.
    fn offsets(&self, t: usize) -> Result<[f64; 3], GeometryError> {
        triangle_offsets(
            |a, b| self.length(self.tris[t].edges[Self::slot(a, b)]),
            |a, b| self.d_at(t, Self::slot(a, b), a),
        )
    }

    /// Signed dual length of an edge, summed over its incident triangles.
    pub fn dual_length(&self, e: usize) -> Result<f64, GeometryError> {
        let mut total = 0.0;
        for &(t, s) in &self.edges[e].tris {
            total += self.offsets(t)?[s];
        }
        Ok(total)
    }

    fn triangle_energy(&self, t: usize, f: &[f64]) -> Result<f64, GeometryError> {
        let off = self.offsets(t)?;
        let tri = &self.tris[t];
        Ok((0..3)
            .map(|s| {
                let (a, b) = (tri.corners[(s + 1) % 3], tri.corners[(s + 2) % 3]);
                0.5 * off[s] / self.length(tri.edges[s]) * (f[a] - f[b]).powi(2)
            })
            .sum())
    }

    pub fn dirichlet_energy(&self, f: &[f64]) -> Result<f64, GeometryError> {
        (0..self.tris.len()).map(|t| self.triangle_energy(t, f)).sum()
    }

    /// Dense Laplacian with off-diagonal entries `|★e| / |e|`.
    pub fn laplacian(&self) -> Result<DMatrix<f64>, GeometryError> {
        let n = self.num_vertices();
        let mut l = DMatrix::zeros(n, n);
        for t in 0..self.tris.len() {
            let off = self.offsets(t)?;
            let tri = &self.tris[t];
            for s in 0..3 {
                let (a, b) = (tri.corners[(s + 1) % 3], tri.corners[(s + 2) % 3]);
                if a != b {
                    let c = off[s] / self.length(tri.edges[s]);
                    l[(a, b)] += c;
                    l[(b, a)] += c;
                }
            }
        }
        for a in 0..n {
            let row: f64 = (0..n).filter(|&b| b != a).map(|b| l[(a, b)]).sum();
            l[(a, a)] = -row;
        }
        Ok(l)
    }

    /// The two triangles on an interior edge, when distinct.
    fn hinge_tris(&self, e: usize) -> Option<[(usize, usize); 2]> {
        match self.edges[e].tris[..] {
            [a, b] if a.0 != b.0 => Some([a, b]),
            _ => None,
        }
    }

    pub fn is_interior(&self, e: usize) -> bool {
        self.hinge_tris(e).is_some()
    }

    /// Planar embedding of the hinge at `e`: tail, head, then the apexes of
    /// the edge's first and second triangle.
    pub fn hinge(&self, e: usize) -> Result<HingeEmbedding, RegularityError> {
        let [(t1, s1), (t2, s2)] = self.hinge_tris(e).ok_or(RegularityError::NotAHinge(e))?;
        let l_ij = self.length(e);
        let mut points = vec![dvector![0.0, 0.0], dvector![l_ij, 0.0]];
        let mut d = vec![vec![f64::NAN; 4]; 4];
        d[0][1] = self.edges[e].d[0];
        d[1][0] = self.edges[e].d[1];
        let mut vertices = vec![self.edges[e].ends[0], self.edges[e].ends[1]];
        for (side, (t, s)) in [(t1, s1), (t2, s2)].into_iter().enumerate() {
            // Corner of t at the edge's tail and head.
            let (a, b) = ((s + 1) % 3, (s + 2) % 3);
            let (ci, cj) = if self.end_at(t, s, a) == 0 { (a, b) } else { (b, a) };
            let apex = s;
            let l_ik = self.length(self.tris[t].edges[Self::slot(ci, apex)]);
            let l_jk = self.length(self.tris[t].edges[Self::slot(cj, apex)]);
            let x = (l_ij * l_ij + l_ik * l_ik - l_jk * l_jk) / (2.0 * l_ij);
            let y2 = l_ik * l_ik - x * x;
            if !(y2 > 0.0) {
                return Err(RegularityError::DegenerateHinge(format!("triangle {t} is degenerate")));
            }
            let y = if side == 0 { y2.sqrt() } else { -y2.sqrt() };
            points.push(dvector![x, y]);
            let p = 2 + side;
            d[0][p] = self.d_at(t, Self::slot(ci, apex), ci);
            d[p][0] = self.d_at(t, Self::slot(ci, apex), apex);
            d[1][p] = self.d_at(t, Self::slot(cj, apex), cj);
            d[p][1] = self.d_at(t, Self::slot(cj, apex), apex);
            vertices.push(self.tris[t].corners[apex]);
        }
        Ok(HingeEmbedding { dim: 2, points, d, vertices: Some(vertices) })
    }

    pub fn edge_positivity(&self) -> EdgePositivity {
        let mut out = EdgePositivity::default();
        for (e, edge) in self.edges.iter().enumerate() {
            for (end, from_tail) in [(0, true), (1, false)] {
                if !(edge.d[end] > 0.0) {
                    out.nonpositive.push((e, from_tail));
                }
            }
            if let Ok(h) = self.hinge(e) {
                if is_flippable(&h) {
                    let [a, b] = flipped_local_lengths(&h);
                    if !(a > 0.0 && b > 0.0) {
                        out.nonpositive_after_flip.push(e);
                    }
                }
            }
        }
        out
    }

    /// Flips the interior edge `e` in place.
    pub fn flip(&mut self, e: usize) -> Result<FlippedHinge, RegularityError> {
        let h = self.hinge(e)?;
        let flipped = flip_edge(&h)?;
        let [(t1, s1), (t2, s2)] = self.hinge_tris(e).expect("hinge checked");

        // Hinge points: 0 = i (tail), 1 = j (head), 2 = k (apex of t1), 3 = l (apex of t2).
        // For each boundary side, its edge and the end index at the lower point.
        let mut side: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for (p_apex, (t, s)) in [(2usize, (t1, s1)), (3, (t2, s2))] {
            let (a, b) = ((s + 1) % 3, (s + 2) % 3);
            let (ci, cj) = if self.end_at(t, s, a) == 0 { (a, b) } else { (b, a) };
            for (p, c) in [(0usize, ci), (1, cj)] {
                let slot = Self::slot(c, s);
                side.insert((p, p_apex), (self.tris[t].edges[slot], self.end_at(t, slot, c)));
            }
        }
        side.insert((2, 3), (e, 0));

        let vertex = |p: usize| h.vertices.as_ref().expect("mesh hinge has vertices")[p];
        let new_tris = [(t1, [2usize, 0, 3]), (t2, [3usize, 1, 2])];
        let touched: HashSet<usize> = side.values().map(|&(edge, _)| edge).collect();
        for &edge in &touched {
            self.edges[edge].tris.retain(|&(t, _)| t != t1 && t != t2);
        }
        self.edges[e].ends = [vertex(2), vertex(3)];
        self.edges[e].d = [flipped.d_kl, flipped.d_lk];
        for (t, pts) in new_tris {
            let mut tri = MeshTri { corners: pts.map(vertex), edges: [0; 3], aligned: [false; 3] };
            for s in 0..3 {
                let (pa, pb) = (pts[(s + 1) % 3], pts[(s + 2) % 3]);
                let (lo, hi) = (pa.min(pb), pa.max(pb));
                let (edge, end_at_lo) = side[&(lo, hi)];
                let end_at_pa = if pa == lo { end_at_lo } else { 1 - end_at_lo };
                tri.edges[s] = edge;
                tri.aligned[s] = end_at_pa == 0;
            }
            self.tris[t] = tri;
        }
        for (t, _) in new_tris {
            for s in 0..3 {
                let edge = self.tris[t].edges[s];
                self.edges[edge].tris.push((t, s));
            }
        }
        Ok(flipped)
    }

    fn is_simplicial(&self) -> bool {
        let mut pairs = HashSet::new();
        for edge in &self.edges {
            let [a, b] = edge.ends;
            if a == b || !pairs.insert((a.min(b), a.max(b))) {
                return false;
            }
        }
        let mut faces = HashSet::new();
        self.tris.iter().all(|t| {
            let mut c = t.corners;
            c.sort_unstable();
            faces.insert(c)
        })
    }

    /// The current triangulation as a complex with its local lengths.
    ///
    /// The result is a plain simplicial complex when vertex sets determine
    /// edges and triangles, and a glued complex otherwise.
    pub fn to_complex(&self) -> Result<(SimplicialComplex, DualityMetric), RegularityError> {
        // Tops in original input order.
        let mut order: Vec<usize> = (0..self.tris.len()).collect();
        order.sort_by_key(|&t| self.source_index.get(t).copied().unwrap_or(t));
        let label = |v: usize| self.vertex_labels[v];
        let complex = if self.is_simplicial() {
            let tuples: Vec<Vec<usize>> = order.iter().map(|&t| self.tris[t].corners.iter().map(|&v| label(v)).collect()).collect();
            SimplicialComplex::from_tuples(2, &tuples)
        } else {
            let tops = order
                .iter()
                .map(|&t| {
                    let tri = &self.tris[t];
                    let glue = (0..3)
                        .map(|s| {
                            // The facet lists its corners in ascending local order.
                            let first_is_tail = if s == 1 { !tri.aligned[s] } else { tri.aligned[s] };
                            let name = format!("e{}", tri.edges[s]);
                            if first_is_tail {
                                GlueLabel::new(name)
                            } else {
                                GlueLabel::with_perm(name, vec![1, 0])
                            }
                        })
                        .collect();
                    TopSimplex::glued(tri.corners.iter().map(|&v| label(v)).collect(), glue)
                })
                .collect();
            SimplicialComplex::build(2, tops)
        }
        .map_err(|e| RegularityError::DegenerateFlip(format!("rebuilding the complex failed: {e}")))?;

        let mut local = vec![[f64::NAN; 2]; complex.num_edges()];
        for (t_new, &src) in complex.source_index().iter().enumerate() {
            let t = order[src];
            // Plain rebuilding sorts corners; glued rebuilding keeps them.
            let pos: Vec<usize> = (0..3)
                .map(|c| {
                    if complex.is_glued() {
                        c
                    } else {
                        let name = complex.vertex_label(complex.top_vertex(t_new, c));
                        self.tris[t].corners.iter().position(|&v| label(v) == name).expect("corner present")
                    }
                })
                .collect();
            for a in 0..3 {
                for b in a + 1..3 {
                    let (e_new, fwd) = complex.local_edge(t_new, a, b);
                    let s = Self::slot(pos[a], pos[b]);
                    let mesh_e = self.tris[t].edges[s];
                    let at_a = self.end_at(t, s, pos[a]);
                    let d = self.edges[mesh_e].d;
                    local[e_new] = if fwd { [d[at_a], d[1 - at_a]] } else { [d[1 - at_a], d[at_a]] };
                }
            }
        }
        Ok((complex, DualityMetric::new(local)))
    }
}

/// One executed flip.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipRecord {
    /// Identifier of the flipped edge in the working mesh; the created edge
    /// reuses it.
    pub edge: usize,
    pub removed_ends: [usize; 2],
    pub created_ends: [usize; 2],
    pub d_kl: f64,
    pub d_lk: f64,
    pub dual_before: f64,
    pub dual_after: f64,
    pub energy_before: f64,
    pub energy_after: f64,
    pub phi: f64,
    pub entropy_before: Option<f64>,
    pub entropy_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegularizeOptions {
    /// Upper bound on the number of flips; `None` uses the combinatorial cap.
    pub max_flips: Option<usize>,
    /// Seed of the default instrumentation function.
    pub seed: u64,
    /// Instrumentation function on vertices; a seeded random unit vector when absent.
    pub instrumentation: Option<Vec<f64>>,
    /// Evaluate the entropy before and after every flip.
    pub track_entropy: bool,
}


#[derive(Debug, Clone)]
pub struct RegularizeResult {
    pub complex: SimplicialComplex,
    pub metric: DualityMetric,
    pub flips: Vec<FlipRecord>,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// Energy of the final mesh recomputed from scratch.
    pub final_energy_recomputed: f64,
    /// Non-regular edges left that could not be flipped, in working-mesh identifiers.
    pub stalled: Vec<usize>,
    /// Interior edges in the working mesh that are glued to the same triangle on both sides.
    pub skipped: Vec<usize>,
    pub edge_positive_input: bool,
    pub hit_flip_cap: bool,
    /// Smallest dual length over interior edges at exit.
    pub min_margin: f64,
    pub instrumentation: Vec<f64>,
}

impl RegularizeResult {
    pub fn is_stalled(&self) -> bool {
        !self.stalled.is_empty()
    }

    /// CSV with one row per flip; row 0 holds the initial energy.
    pub fn energy_log_csv(&self) -> String {
        let mut out = String::from("flip,edge,phi,energy\n");
        out.push_str(&format!("0,,,{:.16e}\n", self.initial_energy));
        for (i, r) in self.flips.iter().enumerate() {
            out.push_str(&format!("{},{},{:.16e},{:.16e}\n", i + 1, r.edge, r.phi, r.energy_after));
        }
        out
    }
}

/// Seeded random function on vertices with unit Euclidean norm.
pub fn random_unit_function(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut f {
        *x /= norm;
    }
    f
}

fn entropy_of_mesh(mesh: &FlipMesh) -> Result<f64, RegularityError> {
    Ok(laplace::entropy_of_dense(&mesh.laplacian()?))
}

/// Flips non-regular edges until every interior edge is locally regular.
///
/// Suspect edges are processed first in, first out, starting from all
/// non-regular edges in identifier order; after a flip the four sides of the
/// hinge are queued again. A non-regular edge that cannot be flipped is
/// reported as stalled rather than treated as an error.
pub fn regularize(
    complex: &SimplicialComplex,
    metric: &DualityMetric,
    options: &RegularizeOptions,
) -> Result<RegularizeResult, RegularityError> {
    let mut mesh = FlipMesh::new(complex, metric)?;
    let n = mesh.num_vertices();
    let f = match &options.instrumentation {
        Some(f) if f.len() != n => return Err(RegularityError::InstrumentationSize { got: f.len(), expected: n }),
        Some(f) => f.clone(),
        None => random_unit_function(n, options.seed),
    };
    let edge_positive_input = mesh.edge_positivity().is_positive();
    let cap = options.max_flips.unwrap_or_else(|| {
        let shift = mesh.num_edges().min(63) as u32;
        mesh.tris.len().max(1).saturating_mul(1usize.checked_shl(shift).unwrap_or(usize::MAX))
    });

    let margin_of = |mesh: &FlipMesh, e: usize| -> Result<Option<RegularityReport>, RegularityError> {
        if !mesh.is_interior(e) {
            return Ok(None);
        }
        Ok(Some(hinge_regularity(&mesh.hinge(e)?)?))
    };

    let mut queue = VecDeque::new();
    let mut queued = vec![false; mesh.num_edges()];
    let mut skipped = Vec::new();
    for e in 0..mesh.num_edges() {
        if mesh.edges[e].tris.len() == 2 && !mesh.is_interior(e) {
            skipped.push(e);
        }
        if let Some(r) = margin_of(&mesh, e)? {
            if !r.is_regular() {
                queue.push_back(e);
                queued[e] = true;
            }
        }
    }

    let initial_energy = mesh.dirichlet_energy(&f)?;
    let mut energy = initial_energy;
    let mut entropy = if options.track_entropy { Some(entropy_of_mesh(&mesh)?) } else { None };
    let mut flips = Vec::new();
    let mut hit_flip_cap = false;
    while let Some(e) = queue.pop_front() {
        queued[e] = false;
        let Some(report) = margin_of(&mesh, e)? else { continue };
        if report.is_regular() {
            continue;
        }
        let h = mesh.hinge(e)?;
        if !is_flippable(&h) {
            continue;
        }
        if flips.len() >= cap {
            hit_flip_cap = true;
            break;
        }
        let phi = flip_energy_factor(&h)?;
        let [(t1, _), (t2, _)] = mesh.hinge_tris(e).expect("interior");
        let before = mesh.triangle_energy(t1, &f)? + mesh.triangle_energy(t2, &f)?;
        let removed_ends = mesh.edges[e].ends;
        let flipped = mesh.flip(e)?;
        let after = mesh.triangle_energy(t1, &f)? + mesh.triangle_energy(t2, &f)?;
        let energy_before = energy;
        energy += after - before;
        let entropy_after = if options.track_entropy { Some(entropy_of_mesh(&mesh)?) } else { None };
        flips.push(FlipRecord {
            edge: e,
            removed_ends,
            created_ends: mesh.edges[e].ends,
            d_kl: flipped.d_kl,
            d_lk: flipped.d_lk,
            dual_before: flipped.dual_before,
            dual_after: flipped.dual_after,
            energy_before,
            energy_after: energy,
            phi,
            entropy_before: entropy,
            entropy_after,
        });
        entropy = entropy_after;
        for t in [t1, t2] {
            for s in 0..3 {
                let side = mesh.tris[t].edges[s];
                if side != e && !queued[side] {
                    queued[side] = true;
                    queue.push_back(side);
                }
            }
        }
    }

    let mut stalled = Vec::new();
    let mut min_margin = f64::INFINITY;
    for e in 0..mesh.num_edges() {
        if let Some(r) = margin_of(&mesh, e)? {
            min_margin = min_margin.min(r.margin);
            if !r.is_regular() {
                stalled.push(e);
            }
        }
    }
    let final_energy_recomputed = mesh.dirichlet_energy(&f)?;
    let (complex, metric) = mesh.to_complex()?;
    Ok(RegularizeResult {
        complex,
        metric,
        flips,
        initial_energy,
        final_energy: energy,
        final_energy_recomputed,
        stalled,
        skipped,
        edge_positive_input,
        hit_flip_cap,
        min_margin,
        instrumentation: f,
    })
}
