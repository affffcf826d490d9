//! Embeddings, centers, signed distances and dual-cell volumes.
//!
//! Every top simplex is embedded on its own (first corner at the origin,
//! first edge along the first axis) and all of its faces get their centers in
//! that frame. Signed distances and chain sums are then local to the top
//! simplex; global simplex and dual volumes are reductions over top simplices.

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

use crate::complex::{mask_corners, Hinge, SimplicialComplex};
use crate::metric::{gram_matrix, squared_volume, DualityMetric, MetricError, REALIZABILITY_TOL};
use crate::par::{self, Execution};

/// Relative tolerance for perpendicularity and frame reconciliation residuals.
pub const GEOMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("degenerate simplex: {0}")]
    Degenerate(String),
    #[error("degenerate angle at the edge's first vertex")]
    DegenerateAngle,
    #[error("degenerate hinge: {0}")]
    DegenerateHinge(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Vertices of a k-simplex realized in ℝ^k.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexEmbedding {
    pub points: Vec<DVector<f64>>,
    /// Sign of the determinant of the edge vectors from the first vertex.
    pub orientation: f64,
}

impl SimplexEmbedding {
    pub fn dim(&self) -> usize {
        self.points.len() - 1
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        (&self.points[a] - &self.points[b]).norm()
    }
}

/// Realizes a simplex from its pairwise edge lengths.
///
/// The first vertex sits at the origin and vertex `a` lies in the span of the
/// first `a` axes with a positive `a`-th coordinate.
pub fn embed_simplex(pairwise: &[Vec<f64>]) -> Result<SimplexEmbedding, GeometryError> {
    let k = pairwise.len() - 1;
    if k == 0 {
        return Ok(SimplexEmbedding { points: vec![DVector::zeros(0)], orientation: 1.0 });
    }
    let lmax = pairwise.iter().flatten().fold(0.0f64, |m, &l| m.max(l.abs()));
    let sq = squared_volume(pairwise);
    if !(sq > REALIZABILITY_TOL * lmax.powi(2 * k as i32)) {
        return Err(GeometryError::Degenerate(format!("squared volume {sq:e} of a {k}-simplex")));
    }
    let chol = Cholesky::new(gram_matrix(pairwise))
        .ok_or_else(|| GeometryError::Degenerate("Gram matrix is not positive definite".into()))?;
    let l = chol.l();
    let mut points = vec![DVector::zeros(k)];
    points.extend((0..k).map(|r| l.row(r).transpose()));
    Ok(SimplexEmbedding { points, orientation: 1.0 })
}

/// Point in the affine span of `points` whose projections onto the edges from
/// the first point are `proj[j] = (C - p_0)·(p_{j+1} - p_0)`, together with its
/// barycentric coordinates.
fn center_in_span(points: &[&DVector<f64>], proj: &[f64]) -> Result<(DVector<f64>, Vec<f64>), GeometryError> {
    let m = points.len() - 1;
    if m == 0 {
        return Ok((points[0].clone(), vec![1.0]));
    }
    let edges = DMatrix::from_columns(&points[1..].iter().map(|p| *p - points[0]).collect::<Vec<_>>());
    let gram = edges.transpose() * &edges;
    let chol = Cholesky::new(gram).ok_or_else(|| GeometryError::Degenerate("collinear face".into()))?;
    let x = chol.solve(&DVector::from_column_slice(proj));
    let center = points[0] + &edges * &x;
    let mut bary = Vec::with_capacity(m + 1);
    bary.push(1.0 - x.sum());
    bary.extend(x.iter().copied());
    Ok((center, bary))
}

/// Unit vector orthogonal to the span of `face` pointing towards `toward`.
fn inward_normal(face: &[&DVector<f64>], toward: &DVector<f64>) -> Result<DVector<f64>, GeometryError> {
    let v = toward - face[0];
    let u = if face.len() == 1 {
        v
    } else {
        let edges = DMatrix::from_columns(&face[1..].iter().map(|p| *p - face[0]).collect::<Vec<_>>());
        let gram = edges.transpose() * &edges;
        let chol = Cholesky::new(gram).ok_or_else(|| GeometryError::Degenerate("collinear face".into()))?;
        let y = chol.solve(&(edges.transpose() * &v));
        &v - &edges * y
    };
    let norm = u.norm();
    if !(norm > 0.0) {
        return Err(GeometryError::Degenerate("point lies in the face span".into()));
    }
    Ok(u / norm)
}

/// Center of a weighted simplex: the point with equal power to all vertices.
/// Returns the center and its weight `r² = |C - p_i|² - w_i`.
pub fn weighted_center(points: &[DVector<f64>], weights: &[f64]) -> Result<(DVector<f64>, f64), GeometryError> {
    let refs: Vec<&DVector<f64>> = points.iter().collect();
    let proj: Vec<f64> = (1..points.len())
        .map(|j| {
            let l2 = (&points[j] - &points[0]).norm_squared();
            0.5 * (l2 + weights[0] - weights[j])
        })
        .collect();
    let (c, _) = center_in_span(&refs, &proj)?;
    let w = (&c - &points[0]).norm_squared() - weights[0];
    Ok((c, w))
}

/// Center of a simplex from local lengths: `d(a, b)` is the distance from
/// vertex `a` to the foot of the center on edge `{a, b}`.
pub fn duality_center(points: &[DVector<f64>], d: impl Fn(usize, usize) -> f64) -> Result<DVector<f64>, GeometryError> {
    let refs: Vec<&DVector<f64>> = points.iter().collect();
    let proj: Vec<f64> = (1..points.len())
        .map(|j| d(0, j) * (&points[j] - &points[0]).norm())
        .collect();
    center_in_span(&refs, &proj).map(|(c, _)| c)
}

/// Signed distance from the edge `{i, j}` center to the triangle center in a
/// triangle with local lengths, by the closed form in the angle at `i`.
pub fn center_offset_2d(l_ij: f64, l_ik: f64, l_jk: f64, d_ij: f64, d_ik: f64) -> Result<f64, GeometryError> {
    let cos = (l_ij * l_ij + l_ik * l_ik - l_jk * l_jk) / (2.0 * l_ij * l_ik);
    let sin = 2.0 * triangle_area(l_ij, l_ik, l_jk) / (l_ij * l_ik);
    if !(sin > 1e-12) {
        return Err(GeometryError::DegenerateAngle);
    }
    Ok((d_ik - d_ij * cos) / sin)
}

/// Area from side lengths, ordered to avoid cancellation on thin triangles.
pub fn triangle_area(a: f64, b: f64, c: f64) -> f64 {
    let mut s = [a, b, c];
    s.sort_by(|x, y| y.total_cmp(x));
    let [a, b, c] = s;
    0.25 * ((a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))).max(0.0).sqrt()
}

/// Centers and chain sums of one top simplex in its own frame.
#[derive(Debug, Clone)]
pub struct TopGeometry {
    dim: usize,
    points: Vec<DVector<f64>>,
    centers: Vec<DVector<f64>>,
    barycentric: Vec<Vec<f64>>,
    signed: Vec<f64>,
    chains_up: Vec<f64>,
    chains_down: Vec<f64>,
    perpendicularity: f64,
}

impl TopGeometry {
    fn compute(pairwise: &[Vec<f64>], d: &[Vec<f64>]) -> Result<Self, GeometryError> {
        let n = pairwise.len() - 1;
        let embedding = embed_simplex(pairwise)?;
        let points = embedding.points;
        let masks = 1usize << (n + 1);
        let lmax = pairwise.iter().flatten().fold(0.0f64, |m, &l| m.max(l));

        let mut centers = vec![DVector::zeros(n); masks];
        let mut barycentric = vec![Vec::new(); masks];
        let mut perpendicularity = 0.0f64;
        for mask in 1..masks as u32 {
            let corners = mask_corners(mask);
            let refs: Vec<&DVector<f64>> = corners.iter().map(|&c| &points[c]).collect();
            let c0 = corners[0];
            let proj: Vec<f64> = corners[1..].iter().map(|&c| d[c0][c] * pairwise[c0][c]).collect();
            let (center, bary) = center_in_span(&refs, &proj)?;
            for (p, &a) in corners.iter().enumerate() {
                for &b in &corners[p + 1..] {
                    let foot = (&center - &points[a]).dot(&(&points[b] - &points[a])) / pairwise[a][b];
                    perpendicularity = perpendicularity.max((foot - d[a][b]).abs() / lmax);
                }
            }
            centers[mask as usize] = center;
            barycentric[mask as usize] = bary;
        }

        let mut signed = vec![0.0; masks * (n + 1)];
        for mask in 1..masks as u32 {
            if mask.count_ones() < 2 {
                continue;
            }
            for i in mask_corners(mask) {
                let face = mask & !(1 << i);
                let face_points: Vec<&DVector<f64>> = mask_corners(face).iter().map(|&c| &points[c]).collect();
                let u = inward_normal(&face_points, &points[i])?;
                signed[mask as usize * (n + 1) + i] = (&centers[mask as usize] - &centers[face as usize]).dot(&u);
            }
        }
        // Exact and closed-form offsets where available; the general solve
        // loses accuracy on thin triangles.
        for a in 0..=n {
            for b in 0..=n {
                if a != b {
                    signed[((1usize << a) | (1 << b)) * (n + 1) + b] = d[a][b];
                }
            }
        }
        if n == 2 {
            for i in 0..3 {
                let (a, b) = ((i + 1) % 3, (i + 2) % 3);
                let angle_cos = |p: usize, q: usize| {
                    let (x, y, z) = (pairwise[p][q], pairwise[p][i], pairwise[q][i]);
                    ((x * x + y * y - z * z) / (2.0 * x * y)).abs()
                };
                let (p, q) = if angle_cos(a, b) <= angle_cos(b, a) { (a, b) } else { (b, a) };
                signed[7 * 3 + i] = center_offset_2d(pairwise[p][q], pairwise[p][i], pairwise[q][i], d[p][q], d[p][i])?;
            }
        }

        // Chains from vertices up to each face, and from each face up to the top.
        let full = masks as u32 - 1;
        let mut chains_up = vec![0.0; masks];
        for mask in 1..masks as u32 {
            chains_up[mask as usize] = if mask.count_ones() == 1 {
                1.0
            } else {
                mask_corners(mask)
                    .into_iter()
                    .map(|i| signed[mask as usize * (n + 1) + i] * chains_up[(mask & !(1 << i)) as usize])
                    .sum()
            };
        }
        let mut chains_down = vec![0.0; masks];
        for mask in (1..masks as u32).rev() {
            chains_down[mask as usize] = if mask == full {
                1.0
            } else {
                (0..=n)
                    .filter(|&i| mask & (1 << i) == 0)
                    .map(|i| {
                        let parent = mask | (1 << i);
                        signed[parent as usize * (n + 1) + i] * chains_down[parent as usize]
                    })
                    .sum()
            };
        }

        Ok(Self { dim: n, points, centers, barycentric, signed, chains_up, chains_down, perpendicularity })
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn center(&self, mask: u32) -> &DVector<f64> {
        &self.centers[mask as usize]
    }

    /// Barycentric coordinates of a face's center with respect to the face's
    /// corners in ascending local order.
    pub fn barycentric(&self, mask: u32) -> &[f64] {
        &self.barycentric[mask as usize]
    }

    /// Signed distance from the center of `mask` without `corner` to the
    /// center of `mask`, positive towards `corner`.
    pub fn signed_distance(&self, mask: u32, corner: usize) -> f64 {
        debug_assert!(mask & (1 << corner) != 0 && mask.count_ones() >= 2);
        self.signed[mask as usize * (self.dim + 1) + corner]
    }

    /// Sum over chains from a vertex up to `mask` of the products of signed distances.
    pub fn chains_to(&self, mask: u32) -> f64 {
        self.chains_up[mask as usize]
    }

    /// Sum over chains from `mask` up to the top simplex.
    pub fn chains_from(&self, mask: u32) -> f64 {
        self.chains_down[mask as usize]
    }

    pub fn perpendicularity_residual(&self) -> f64 {
        self.perpendicularity
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Pairwise lengths and local lengths of top simplex `t`, by local corner.
pub fn top_local_data(complex: &SimplicialComplex, metric: &DualityMetric, t: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let n = complex.dim();
    let mut pairwise = vec![vec![0.0; n + 1]; n + 1];
    let mut d = vec![vec![0.0; n + 1]; n + 1];
    for a in 0..=n {
        for b in 0..=n {
            if a != b {
                let (e, forward) = complex.local_edge(t, a, b);
                pairwise[a][b] = metric.edge_length(e);
                d[a][b] = metric.from_end(e, forward);
            }
        }
    }
    (pairwise, d)
}

/// Centers, signed distances and volumes for a whole complex.
#[derive(Debug, Clone)]
pub struct DualGeometry {
    dim: usize,
    tops: Vec<TopGeometry>,
    lengths: Vec<f64>,
    simplex_volumes: Vec<Vec<f64>>,
    dual_volumes: Vec<Vec<f64>>,
    cross_check: f64,
    boundary: bool,
}

/// Comparison of the two ways of summing the total volume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeCheck {
    pub simplex_total: f64,
    pub dual_vertex_total: f64,
    pub difference: f64,
    /// The identity is exact only for closed complexes; with a boundary the
    /// report is informational.
    pub boundary_present: bool,
}

impl VolumeCheck {
    pub fn pass(&self) -> bool {
        self.difference.abs() <= 1e-9 * self.simplex_total.abs()
    }
}

impl DualGeometry {
    pub fn compute(complex: &SimplicialComplex, metric: &DualityMetric) -> Result<Self, GeometryError> {
        Self::compute_with(complex, metric, Execution::default())
    }

    pub fn compute_with(complex: &SimplicialComplex, metric: &DualityMetric, exec: Execution) -> Result<Self, GeometryError> {
        let n = complex.dim();
        if metric.local.len() != complex.num_edges() {
            return Err(MetricError::MissingLocalLength { edge: metric.local.len().min(complex.num_edges()) }.into());
        }
        let tops = par::map_range(exec, complex.num_tops(), |t| {
            let (pairwise, d) = top_local_data(complex, metric, t);
            TopGeometry::compute(&pairwise, &d).map_err(|e| match e {
                GeometryError::Degenerate(msg) => GeometryError::Degenerate(format!("top simplex {t}: {msg}")),
                other => other,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

        let mut simplex_volumes: Vec<Vec<f64>> = (0..=n).map(|k| vec![0.0; complex.num_simplices(k)]).collect();
        for (k, volumes) in simplex_volumes.iter_mut().enumerate() {
            for (id, v) in volumes.iter_mut().enumerate() {
                let (t, mask) = complex.first_occurrence(k, id);
                *v = tops[t].chains_to(mask) / factorial(k);
            }
        }

        let mut dual_volumes: Vec<Vec<f64>> = (0..=n).map(|k| vec![0.0; complex.num_simplices(k)]).collect();
        let mut cross_check = 0.0f64;
        for (t, top) in tops.iter().enumerate() {
            for mask in 1..(1u32 << (n + 1)) {
                let k = mask.count_ones() as usize - 1;
                let face = complex.local_face(t, mask);
                dual_volumes[k][face.id] += top.chains_from(mask) / factorial(n - k);
                if k >= 1 {
                    cross_check = cross_check.max(Self::frame_mismatch(complex, &tops, k, face.id, t, mask));
                }
            }
        }

        Ok(Self {
            dim: n,
            tops,
            lengths: metric.lengths(),
            simplex_volumes,
            dual_volumes,
            cross_check,
            boundary: !complex.is_closed(),
        })
    }

    /// Disagreement between the center of a face seen from one top simplex and
    /// from the simplex's first occurrence, compared through the squared
    /// distances to the face's vertices.
    fn frame_mismatch(complex: &SimplicialComplex, tops: &[TopGeometry], k: usize, id: usize, t: usize, mask: u32) -> f64 {
        let (t0, mask0) = complex.first_occurrence(k, id);
        if (t0, mask0) == (t, mask) {
            return 0.0;
        }
        let order = &complex.local_face(t, mask).order;
        let order0 = &complex.local_face(t0, mask0).order;
        let (c, c0) = (tops[t].center(mask), tops[t0].center(mask0));
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for (&a, &a0) in order.iter().zip(order0) {
            let r = (c - &tops[t].points[a]).norm_squared();
            let r0 = (c0 - &tops[t0].points[a0]).norm_squared();
            worst = worst.max((r - r0).abs());
            scale = scale.max(tops[t].points[a].norm_squared());
        }
        for &a in order {
            for &b in order {
                scale = scale.max((&tops[t].points[a] - &tops[t].points[b]).norm_squared());
            }
        }
        worst / scale.max(f64::MIN_POSITIVE)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn top(&self, t: usize) -> &TopGeometry {
        &self.tops[t]
    }

    pub fn tops(&self) -> &[TopGeometry] {
        &self.tops
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        self.lengths[e]
    }

    pub fn simplex_volume(&self, k: usize, id: usize) -> f64 {
        self.simplex_volumes[k][id]
    }

    pub fn simplex_volumes(&self, k: usize) -> &[f64] {
        &self.simplex_volumes[k]
    }

    /// Signed volume of the dual cell, summed over the top simplices present.
    pub fn dual_volume(&self, k: usize, id: usize) -> f64 {
        self.dual_volumes[k][id]
    }

    pub fn dual_volumes(&self, k: usize) -> &[f64] {
        &self.dual_volumes[k]
    }

    /// Largest perpendicularity residual over all computed centers, relative
    /// to the longest edge of the top simplex.
    pub fn perpendicularity_residual(&self) -> f64 {
        self.tops.iter().fold(0.0, |m, t| m.max(t.perpendicularity))
    }

    /// Largest relative disagreement of a shared face's center between the
    /// frames of the top simplices containing it.
    pub fn cross_check_residual(&self) -> f64 {
        self.cross_check
    }

    /// Center weight `|C - p|² - w` of the face `mask` of top `t`, where `p` is
    /// the face's first corner and `w` its weight.
    pub fn center_weight(&self, complex: &SimplicialComplex, weights: &[f64], t: usize, mask: u32) -> f64 {
        let c0 = mask.trailing_zeros() as usize;
        let top = &self.tops[t];
        (top.center(mask) - &top.points[c0]).norm_squared() - weights[complex.top_vertex(t, c0)]
    }

    pub fn total_volume_check(&self) -> VolumeCheck {
        let simplex_total: f64 = self.simplex_volumes[self.dim].iter().sum();
        let dual_vertex_total: f64 = self.dual_volumes[0].iter().sum();
        VolumeCheck {
            simplex_total,
            dual_vertex_total,
            difference: simplex_total - dual_vertex_total,
            boundary_present: self.boundary,
        }
    }
}

/// Two top simplices sharing a facet, realized in ℝ^n with the facet
/// coordinates shared and the apexes on opposite sides.
///
/// Points are ordered facet corners first (in the facet's canonical order),
/// then the two apexes.
#[derive(Debug, Clone, PartialEq)]
pub struct HingeEmbedding {
    pub dim: usize,
    pub points: Vec<DVector<f64>>,
    /// `d[a][b]`: local length at point `a` towards `b`; NaN between the apexes.
    pub d: Vec<Vec<f64>>,
    /// Global vertex per point, when built from a complex.
    pub vertices: Option<Vec<usize>>,
}

impl HingeEmbedding {
    pub fn from_complex(complex: &SimplicialComplex, metric: &DualityMetric, hinge: &Hinge) -> Result<Self, GeometryError> {
        let n = complex.dim();
        let full = (1u32 << (n + 1)) - 1;
        let mut local = Vec::with_capacity(2);
        for s in 0..2 {
            let t = hinge.tops[s];
            let apex = hinge.apex_local[s];
            let mut corners = complex.local_face(t, full & !(1 << apex)).order.clone();
            corners.push(apex);
            local.push((t, corners));
        }
        let pairwise_of = |t: usize, corners: &[usize]| {
            let mut pw = vec![vec![0.0; corners.len()]; corners.len()];
            for (p, &a) in corners.iter().enumerate() {
                for (q, &b) in corners.iter().enumerate() {
                    if p != q {
                        pw[p][q] = metric.edge_length(complex.local_edge(t, a, b).0);
                    }
                }
            }
            pw
        };
        let e1 = embed_simplex(&pairwise_of(local[0].0, &local[0].1))
            .map_err(|e| GeometryError::DegenerateHinge(e.to_string()))?;
        let e2 = embed_simplex(&pairwise_of(local[1].0, &local[1].1))
            .map_err(|e| GeometryError::DegenerateHinge(e.to_string()))?;
        let mut points: Vec<DVector<f64>> = e1.points.clone();
        let mut apex2 = e2.points[n].clone();
        apex2[n - 1] = -apex2[n - 1];
        points.push(apex2);

        let mut d = vec![vec![f64::NAN; n + 2]; n + 2];
        for s in 0..2 {
            let (t, corners) = &local[s];
            let index = |p: usize| if p < n { p } else { n + s };
            for (p, &a) in corners.iter().enumerate() {
                for (q, &b) in corners.iter().enumerate() {
                    if p != q {
                        d[index(p)][index(q)] = metric.at_corner(complex, *t, a, b);
                    }
                }
            }
        }
        let mut vertices: Vec<usize> = local[0].1.iter().map(|&c| complex.top_vertex(local[0].0, c)).collect();
        vertices.push(complex.top_vertex(local[1].0, hinge.apex_local[1]));
        Ok(Self { dim: n, points, d, vertices: Some(vertices) })
    }

    /// Builds a hinge from explicit coordinates and local lengths.
    pub fn from_points(points: Vec<DVector<f64>>, d: Vec<Vec<f64>>) -> Self {
        Self { dim: points.len() - 2, points, d, vertices: None }
    }

    /// A hinge with local lengths induced by vertex weights.
    pub fn from_weighted_points(points: Vec<DVector<f64>>, weights: &[f64]) -> Self {
        let n = points.len() - 2;
        let mut d = vec![vec![f64::NAN; n + 2]; n + 2];
        for a in 0..n + 2 {
            for b in 0..n + 2 {
                if a != b && !(a >= n && b >= n) {
                    let l = (&points[a] - &points[b]).norm();
                    d[a][b] = (l * l + weights[a] - weights[b]) / (2.0 * l);
                }
            }
        }
        Self::from_points(points, d)
    }

    /// Point indices of top simplex `s` (0 or 1): facet corners then apex.
    pub fn top_indices(&self, s: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.dim).collect();
        idx.push(self.dim + s);
        idx
    }

    pub fn length(&self, a: usize, b: usize) -> f64 {
        (&self.points[a] - &self.points[b]).norm()
    }

    /// Center of the simplex spanned by the given point indices.
    pub fn center_of(&self, indices: &[usize]) -> Result<(DVector<f64>, Vec<f64>), GeometryError> {
        let refs: Vec<&DVector<f64>> = indices.iter().map(|&i| &self.points[i]).collect();
        let proj: Vec<f64> = indices[1..]
            .iter()
            .map(|&j| self.d[indices[0]][j] * self.length(indices[0], j))
            .collect();
        center_in_span(&refs, &proj).map_err(|e| GeometryError::DegenerateHinge(e.to_string()))
    }

    pub fn top_center(&self, s: usize) -> Result<DVector<f64>, GeometryError> {
        self.center_of(&self.top_indices(s)).map(|(c, _)| c)
    }

    pub fn facet_center(&self) -> Result<DVector<f64>, GeometryError> {
        self.center_of(&(0..self.dim).collect::<Vec<_>>()).map(|(c, _)| c)
    }

    /// Unit normal of the shared facet pointing towards the first apex.
    pub fn facet_normal(&self) -> Result<DVector<f64>, GeometryError> {
        let face: Vec<&DVector<f64>> = self.points[..self.dim].iter().collect();
        inward_normal(&face, &self.points[self.dim]).map_err(|e| GeometryError::DegenerateHinge(e.to_string()))
    }

    /// Signed volume of the dual of the shared facet.
    pub fn dual_facet_volume(&self) -> Result<f64, GeometryError> {
        let u = self.facet_normal()?;
        Ok((self.top_center(0)? - self.top_center(1)?).dot(&u))
    }

    /// Vertex weights reproducing the local lengths, with the first facet
    /// corner at weight zero.
    pub fn local_weights(&self) -> Vec<f64> {
        (0..self.dim + 2)
            .map(|a| if a == 0 { 0.0 } else { self.d[a][0].powi(2) - self.d[0][a].powi(2) })
            .collect()
    }

    /// Signed distances of the apexes from the facet hyperplane.
    pub fn apex_heights(&self) -> Result<[f64; 2], GeometryError> {
        let u = self.facet_normal()?;
        let h = |p: &DVector<f64>| (p - &self.points[0]).dot(&u);
        Ok([h(&self.points[self.dim]), h(&self.points[self.dim + 1])])
    }
}
