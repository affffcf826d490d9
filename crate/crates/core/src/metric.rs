//! Metric structures over a complex and the conversions between them.
//!
//! Edge-indexed data is stored in edge identifier order and vertex-indexed data
//! in vertex order. Local lengths of a duality structure are stored per edge
//! as `[from tail, from head]` relative to the edge's canonical orientation.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::complex::SimplicialComplex;

/// Relative threshold on squared volumes: a k-simplex is realizable when its
/// squared volume exceeds this times `(max edge)^(2k)`.
pub const REALIZABILITY_TOL: f64 = 1e-12;

/// Relative threshold for per-triangle compatibility and loop residuals,
/// scaled by the squared longest edge involved.
pub const COMPATIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("no length for edge {edge}")]
    MissingLength { edge: usize },
    #[error("no local lengths for edge {edge}")]
    MissingLocalLength { edge: usize },
    #[error("no weight for vertex {vertex}")]
    MissingWeight { vertex: usize },
    #[error("{dim}-simplex {id} is not realizable (squared volume {squared_volume:e})")]
    NotRealizable { dim: usize, id: usize, squared_volume: f64 },
    #[error("triangle {triangle} violates local length compatibility (residual {residual:e})")]
    Incompatible { triangle: usize, residual: f64 },
    #[error("invalid structure: {0}")]
    InvalidStructure(String),
    #[error("loop property fails: residual {} around edges {:?}", .worst.residual, .worst.edges)]
    LoopObstruction { worst: LoopCycle, offending: Vec<LoopCycle> },
    #[error("complex is not connected")]
    Disconnected,
    #[error("unknown vertex {0}")]
    UnknownVertex(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Euclidean,
    Weighted,
    Thurston,
    Duality,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Euclidean => "euclidean",
            MetricKind::Weighted => "weighted",
            MetricKind::Thurston => "thurston",
            MetricKind::Duality => "duality",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "euclidean" => Some(MetricKind::Euclidean),
            "weighted" => Some(MetricKind::Weighted),
            "thurston" => Some(MetricKind::Thurston),
            "duality" => Some(MetricKind::Duality),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanMetric {
    pub lengths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMetric {
    pub base: EuclideanMetric,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThurstonMetric {
    pub weights: Vec<f64>,
    pub c: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualityMetric {
    pub local: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MetricStructure {
    Euclidean(EuclideanMetric),
    Weighted(WeightedMetric),
    Thurston(ThurstonMetric),
    Duality(DualityMetric),
}

/// Squared volume of one simplex as reported by [`validate_euclidean`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexVolumeCheck {
    pub dim: usize,
    pub id: usize,
    pub squared_volume: f64,
    pub threshold: f64,
}

impl SimplexVolumeCheck {
    pub fn ok(&self) -> bool {
        self.squared_volume > self.threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub simplices: Vec<SimplexVolumeCheck>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.simplices.iter().all(SimplexVolumeCheck::ok)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SimplexVolumeCheck> {
        self.simplices.iter().filter(|s| !s.ok())
    }

    pub fn into_result(self) -> Result<Self, MetricError> {
        let first = self.failures().next().copied();
        match first {
            Some(f) => Err(MetricError::NotRealizable { dim: f.dim, id: f.id, squared_volume: f.squared_volume }),
            None => Ok(self),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityReport {
    /// Residual per triangle identifier.
    pub residuals: Vec<f64>,
    /// Squared longest edge per triangle, the scale of its residual.
    pub scales: Vec<f64>,
    pub tolerance: f64,
}

impl CompatibilityReport {
    pub fn max_abs(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    pub fn failures(&self) -> Vec<usize> {
        (0..self.residuals.len())
            .filter(|&t| self.residuals[t].abs() > self.tolerance * self.scales[t])
            .collect()
    }

    pub fn pass(&self) -> bool {
        self.failures().is_empty()
    }
}

/// A cycle of edges closed by one non-tree edge, with the weight mismatch
/// accumulated around it.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopCycle {
    pub closing_edge: usize,
    pub edges: Vec<usize>,
    pub vertices: Vec<usize>,
    pub residual: f64,
}

/// Weights recovered from local lengths together with every closure residual.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightRecovery {
    pub metric: WeightedMetric,
    pub cycles: Vec<LoopCycle>,
}

/// Pairwise edge lengths of a simplex, indexed by canonical vertex position.
pub fn simplex_lengths(complex: &SimplicialComplex, k: usize, id: usize, lengths: &[f64]) -> Vec<Vec<f64>> {
    let (t, mask) = complex.first_occurrence(k, id);
    let order = &complex.local_face(t, mask).order;
    let mut out = vec![vec![0.0; k + 1]; k + 1];
    for p in 0..=k {
        for q in p + 1..=k {
            let (e, _) = complex.local_edge(t, order[p], order[q]);
            out[p][q] = lengths[e];
            out[q][p] = lengths[e];
        }
    }
    out
}

/// Gram matrix of the edge vectors from vertex 0 of a simplex.
pub fn gram_matrix(pairwise: &[Vec<f64>]) -> DMatrix<f64> {
    let k = pairwise.len() - 1;
    DMatrix::from_fn(k, k, |a, b| {
        let (a, b) = (a + 1, b + 1);
        0.5 * (pairwise[0][a].powi(2) + pairwise[0][b].powi(2) - pairwise[a][b].powi(2))
    })
}

/// Squared k-volume of a simplex from its pairwise edge lengths.
pub fn squared_volume(pairwise: &[Vec<f64>]) -> f64 {
    let k = pairwise.len() - 1;
    if k == 0 {
        return 1.0;
    }
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    gram_matrix(pairwise).determinant() / (fact * fact)
}

fn check_len<T>(values: &[T], expected: usize, missing: impl Fn(usize) -> MetricError) -> Result<(), MetricError> {
    if values.len() < expected {
        Err(missing(values.len()))
    } else if values.len() > expected {
        Err(MetricError::InvalidStructure(format!(
            "{} values given for {expected} entries",
            values.len()
        )))
    } else {
        Ok(())
    }
}

/// Squared volume of every simplex of dimension at least one.
pub fn validate_euclidean(complex: &SimplicialComplex, lengths: &[f64]) -> Result<ValidationReport, MetricError> {
    check_len(lengths, complex.num_edges(), |edge| MetricError::MissingLength { edge })?;
    if let Some(edge) = lengths.iter().position(|l| !l.is_finite()) {
        return Err(MetricError::InvalidStructure(format!("edge {edge} has a non-finite length")));
    }
    let mut simplices = Vec::new();
    for k in 1..=complex.dim() {
        for id in 0..complex.num_simplices(k) {
            let pairwise = simplex_lengths(complex, k, id, lengths);
            let lmax = pairwise.iter().flatten().fold(0.0f64, |m, &l| m.max(l.abs()));
            let squared_volume = if k == 1 {
                // Sign matters for single edges: a nonpositive length is not realizable.
                if pairwise[0][1] > 0.0 { pairwise[0][1].powi(2) } else { -pairwise[0][1].powi(2) }
            } else {
                squared_volume(&pairwise)
            };
            let threshold = REALIZABILITY_TOL * lmax.powi(2 * k as i32);
            simplices.push(SimplexVolumeCheck { dim: k, id, squared_volume, threshold });
        }
    }
    Ok(ValidationReport { simplices })
}

impl EuclideanMetric {
    pub fn new(lengths: Vec<f64>) -> Self {
        Self { lengths }
    }

    pub fn validate(&self, complex: &SimplicialComplex) -> Result<ValidationReport, MetricError> {
        validate_euclidean(complex, &self.lengths)?.into_result()
    }
}

impl WeightedMetric {
    pub fn new(lengths: Vec<f64>, weights: Vec<f64>) -> Self {
        Self { base: EuclideanMetric::new(lengths), weights }
    }

    pub fn lengths(&self) -> &[f64] {
        &self.base.lengths
    }

    pub fn validate(&self, complex: &SimplicialComplex) -> Result<(), MetricError> {
        check_len(&self.weights, complex.num_vertices(), |vertex| MetricError::MissingWeight { vertex })?;
        if let Some(v) = self.weights.iter().position(|w| !w.is_finite()) {
            return Err(MetricError::InvalidStructure(format!("vertex {v} has a non-finite weight")));
        }
        self.base.validate(complex).map(|_| ())
    }

    /// Shifts every weight by `t`; all derived geometry is unchanged.
    pub fn shifted(&self, t: f64) -> Self {
        Self { base: self.base.clone(), weights: self.weights.iter().map(|w| w + t).collect() }
    }
}

impl ThurstonMetric {
    pub fn new(weights: Vec<f64>, c: Vec<f64>) -> Self {
        Self { weights, c }
    }

    /// Induced lengths `sqrt(w_i + w_j - c_ij)`.
    pub fn lengths(&self, complex: &SimplicialComplex) -> Result<Vec<f64>, MetricError> {
        check_len(&self.weights, complex.num_vertices(), |vertex| MetricError::MissingWeight { vertex })?;
        check_len(&self.c, complex.num_edges(), |edge| MetricError::MissingLength { edge })?;
        (0..complex.num_edges())
            .map(|e| {
                let [i, j] = complex.edge_vertices(e);
                let sq = self.weights[i] + self.weights[j] - self.c[e];
                if sq > 0.0 && sq.is_finite() {
                    Ok(sq.sqrt())
                } else {
                    Err(MetricError::InvalidStructure(format!(
                        "edge {e}: c = {} is not below w_i + w_j = {}",
                        self.c[e],
                        self.weights[i] + self.weights[j]
                    )))
                }
            })
            .collect()
    }

    pub fn validate(&self, complex: &SimplicialComplex) -> Result<(), MetricError> {
        let lengths = self.lengths(complex)?;
        validate_euclidean(complex, &lengths)?.into_result().map(|_| ())
    }
}

impl DualityMetric {
    pub fn new(local: Vec<[f64; 2]>) -> Self {
        Self { local }
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        self.local[e][0] + self.local[e][1]
    }

    pub fn lengths(&self) -> Vec<f64> {
        (0..self.local.len()).map(|e| self.edge_length(e)).collect()
    }

    /// Local length of edge `e` measured from its tail (`from_tail`) or head.
    pub fn from_end(&self, e: usize, from_tail: bool) -> f64 {
        self.local[e][if from_tail { 0 } else { 1 }]
    }

    /// Local length at corner `a` of top simplex `t` along the edge to `b`.
    pub fn at_corner(&self, complex: &SimplicialComplex, t: usize, a: usize, b: usize) -> f64 {
        let (e, forward) = complex.local_edge(t, a, b);
        self.from_end(e, forward)
    }

    pub fn compatibility(&self, complex: &SimplicialComplex, tolerance: f64) -> Result<CompatibilityReport, MetricError> {
        check_compatibility(complex, self, tolerance)
    }

    pub fn validate(&self, complex: &SimplicialComplex) -> Result<(), MetricError> {
        let report = check_compatibility(complex, self, COMPATIBILITY_TOL)?;
        if let Some(&triangle) = report.failures().first() {
            return Err(MetricError::Incompatible { triangle, residual: report.residuals[triangle] });
        }
        if let Some(e) = self.local.iter().position(|d| !(d[0].is_finite() && d[1].is_finite())) {
            return Err(MetricError::InvalidStructure(format!("edge {e} has a non-finite local length")));
        }
        validate_euclidean(complex, &self.lengths())?.into_result().map(|_| ())
    }
}

/// Residual `(d_ij² + d_jk² + d_ki²) - (d_ji² + d_ik² + d_kj²)` of a triangle
/// given as `d[a][b]`, the local length at corner `a` towards `b`.
pub fn compatibility_residual(d: &[[f64; 3]; 3]) -> f64 {
    let sq = |a: usize, b: usize| d[a][b] * d[a][b];
    (sq(0, 1) + sq(1, 2) + sq(2, 0)) - (sq(1, 0) + sq(0, 2) + sq(2, 1))
}

pub fn check_compatibility(
    complex: &SimplicialComplex,
    metric: &DualityMetric,
    tolerance: f64,
) -> Result<CompatibilityReport, MetricError> {
    check_len(&metric.local, complex.num_edges(), |edge| MetricError::MissingLocalLength { edge })?;
    let count = if complex.dim() >= 2 { complex.num_simplices(2) } else { 0 };
    let mut residuals = Vec::with_capacity(count);
    let mut scales = Vec::with_capacity(count);
    for tri in 0..count {
        let (t, mask) = complex.first_occurrence(2, tri);
        let order = &complex.local_face(t, mask).order;
        let mut d = [[0.0; 3]; 3];
        let mut lmax = 0.0f64;
        for p in 0..3 {
            for q in 0..3 {
                if p != q {
                    d[p][q] = metric.at_corner(complex, t, order[p], order[q]);
                }
            }
        }
        for p in 0..3 {
            for q in p + 1..3 {
                lmax = lmax.max((d[p][q] + d[q][p]).abs());
            }
        }
        residuals.push(compatibility_residual(&d));
        scales.push(lmax * lmax);
    }
    Ok(CompatibilityReport { residuals, scales, tolerance })
}

pub fn weighted_to_thurston(complex: &SimplicialComplex, m: &WeightedMetric) -> Result<ThurstonMetric, MetricError> {
    check_len(&m.weights, complex.num_vertices(), |vertex| MetricError::MissingWeight { vertex })?;
    check_len(&m.base.lengths, complex.num_edges(), |edge| MetricError::MissingLength { edge })?;
    let c = (0..complex.num_edges())
        .map(|e| {
            let [i, j] = complex.edge_vertices(e);
            let l = m.base.lengths[e];
            if l <= 0.0 {
                return Err(MetricError::InvalidStructure(format!("edge {e} has nonpositive length")));
            }
            Ok(m.weights[i] + m.weights[j] - l * l)
        })
        .collect::<Result<_, _>>()?;
    Ok(ThurstonMetric { weights: m.weights.clone(), c })
}

pub fn thurston_to_weighted(complex: &SimplicialComplex, m: &ThurstonMetric) -> Result<WeightedMetric, MetricError> {
    let lengths = m.lengths(complex)?;
    Ok(WeightedMetric::new(lengths, m.weights.clone()))
}

/// Local lengths `d_ij = (ℓ² + w_i - w_j) / (2ℓ)` at both ends of each edge.
pub fn weighted_to_duality(complex: &SimplicialComplex, m: &WeightedMetric) -> Result<DualityMetric, MetricError> {
    check_len(&m.weights, complex.num_vertices(), |vertex| MetricError::MissingWeight { vertex })?;
    check_len(&m.base.lengths, complex.num_edges(), |edge| MetricError::MissingLength { edge })?;
    let local = (0..complex.num_edges())
        .map(|e| {
            let [i, j] = complex.edge_vertices(e);
            let l = m.base.lengths[e];
            if l <= 0.0 {
                return Err(MetricError::InvalidStructure(format!("edge {e} has nonpositive length")));
            }
            let dw = m.weights[i] - m.weights[j];
            Ok([(l * l + dw) / (2.0 * l), (l * l - dw) / (2.0 * l)])
        })
        .collect::<Result<_, _>>()?;
    Ok(DualityMetric { local })
}

/// Propagates weights from `base` with `w(base) = w0` along a breadth-first
/// spanning tree and reports the closure residual of every other edge.
///
/// Never fails on a loop obstruction; see [`duality_to_weighted`].
pub fn recover_weights(
    complex: &SimplicialComplex,
    m: &DualityMetric,
    base: usize,
    w0: f64,
) -> Result<WeightRecovery, MetricError> {
    check_len(&m.local, complex.num_edges(), |edge| MetricError::MissingLocalLength { edge })?;
    let n = complex.num_vertices();
    if base >= n {
        return Err(MetricError::UnknownVertex(base));
    }
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in 0..complex.num_edges() {
        let [i, j] = complex.edge_vertices(e);
        adjacency[i].push(e);
        if i != j {
            adjacency[j].push(e);
        }
    }
    let mut weights = vec![f64::NAN; n];
    let mut parent_edge = vec![usize::MAX; n];
    let mut depth = vec![0usize; n];
    let mut tree_edge = vec![false; complex.num_edges()];
    weights[base] = w0;
    let mut queue = VecDeque::from([base]);
    while let Some(v) = queue.pop_front() {
        for &e in &adjacency[v] {
            let [i, j] = complex.edge_vertices(e);
            let (other, from_tail) = if i == v { (j, true) } else { (i, false) };
            if !weights[other].is_nan() {
                continue;
            }
            // w_other = d(other→v)² − d(v→other)² + w_v
            let d_v = m.from_end(e, from_tail);
            let d_other = m.from_end(e, !from_tail);
            weights[other] = d_other * d_other - d_v * d_v + weights[v];
            parent_edge[other] = e;
            depth[other] = depth[v] + 1;
            tree_edge[e] = true;
            queue.push_back(other);
        }
    }
    if weights.iter().any(|w| w.is_nan()) {
        return Err(MetricError::Disconnected);
    }
    let other_end = |e: usize, v: usize| {
        let [i, j] = complex.edge_vertices(e);
        if i == v { j } else { i }
    };
    let mut cycles = Vec::new();
    for e in 0..complex.num_edges() {
        if tree_edge[e] {
            continue;
        }
        let [i, j] = complex.edge_vertices(e);
        let [di, dj] = m.local[e];
        let residual = dj * dj - di * di + weights[i] - weights[j];
        // Tree paths from both ends up to their common ancestor.
        let (mut a, mut b) = (j, i);
        let mut up_from_head = vec![j];
        let mut edges_head = Vec::new();
        let mut up_from_tail = vec![i];
        let mut edges_tail = Vec::new();
        while a != b {
            if depth[a] >= depth[b] {
                edges_head.push(parent_edge[a]);
                a = other_end(parent_edge[a], a);
                up_from_head.push(a);
            } else {
                edges_tail.push(parent_edge[b]);
                b = other_end(parent_edge[b], b);
                up_from_tail.push(b);
            }
        }
        let mut vertices = vec![i];
        let mut edges = vec![e];
        vertices.extend(up_from_head.iter().copied());
        edges.extend(edges_head.iter().copied());
        up_from_tail.pop();
        vertices.extend(up_from_tail.iter().rev().copied());
        edges.extend(edges_tail.iter().rev().copied());
        vertices.pop();
        cycles.push(LoopCycle { closing_edge: e, edges, vertices, residual });
    }
    Ok(WeightRecovery { metric: WeightedMetric::new(m.lengths(), weights), cycles })
}

/// Weights reproducing the local lengths, or the loop obstruction.
///
/// A residual fails when it exceeds `tolerance · (max edge length)²`.
pub fn duality_to_weighted(
    complex: &SimplicialComplex,
    m: &DualityMetric,
    base: usize,
    w0: f64,
    tolerance: f64,
) -> Result<WeightedMetric, MetricError> {
    let recovery = recover_weights(complex, m, base, w0)?;
    let scale = m.lengths().iter().fold(0.0f64, |a, l| a.max(l.abs())).powi(2);
    let mut offending: Vec<LoopCycle> = recovery
        .cycles
        .into_iter()
        .filter(|c| c.residual.abs() > tolerance * scale)
        .collect();
    if offending.is_empty() {
        return Ok(recovery.metric);
    }
    let worst = offending
        .iter()
        .max_by(|a, b| a.residual.abs().total_cmp(&b.residual.abs()).then(b.closing_edge.cmp(&a.closing_edge)))
        .cloned()
        .expect("nonempty");
    offending.sort_by_key(|c| c.closing_edge);
    Err(MetricError::LoopObstruction { worst, offending })
}

impl MetricStructure {
    pub fn kind(&self) -> MetricKind {
        match self {
            MetricStructure::Euclidean(_) => MetricKind::Euclidean,
            MetricStructure::Weighted(_) => MetricKind::Weighted,
            MetricStructure::Thurston(_) => MetricKind::Thurston,
            MetricStructure::Duality(_) => MetricKind::Duality,
        }
    }

    pub fn lengths(&self, complex: &SimplicialComplex) -> Result<Vec<f64>, MetricError> {
        match self {
            MetricStructure::Euclidean(m) => Ok(m.lengths.clone()),
            MetricStructure::Weighted(m) => Ok(m.base.lengths.clone()),
            MetricStructure::Thurston(m) => m.lengths(complex),
            MetricStructure::Duality(m) => Ok(m.lengths()),
        }
    }

    /// Local lengths; a Euclidean structure is read with zero weights.
    pub fn to_duality(&self, complex: &SimplicialComplex) -> Result<DualityMetric, MetricError> {
        match self {
            MetricStructure::Euclidean(m) => weighted_to_duality(
                complex,
                &WeightedMetric { base: m.clone(), weights: vec![0.0; complex.num_vertices()] },
            ),
            MetricStructure::Weighted(m) => weighted_to_duality(complex, m),
            MetricStructure::Thurston(m) => weighted_to_duality(complex, &thurston_to_weighted(complex, m)?),
            MetricStructure::Duality(m) => Ok(m.clone()),
        }
    }

    pub fn validate(&self, complex: &SimplicialComplex) -> Result<(), MetricError> {
        match self {
            MetricStructure::Euclidean(m) => m.validate(complex).map(|_| ()),
            MetricStructure::Weighted(m) => m.validate(complex),
            MetricStructure::Thurston(m) => m.validate(complex),
            MetricStructure::Duality(m) => m.validate(complex),
        }
    }
}
