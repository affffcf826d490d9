//! The `dualmesh` text format.
//!
//! ```text
//! dualmesh 1
//! dim 2
//! kind weighted
//! vertices 4
//! top 0 1 2
//! top 0 1 3
//! edge 0 0 1
//! ...
//! len 0 1.0000000000000000e0
//! weight 0 0.0000000000000000e0
//! f 0 1.0000000000000000e0
//! ```
//!
//! Vertices are referred to by label. A top simplex on a glued complex lists
//! one label per facet after `glue`, each optionally followed by a
//! permutation such as `a:1,0`. `edge e tail head` declares the canonical
//! orientation that `dloc e d_tail d_head` refers to. Blank lines and text
//! after `#` are ignored. The writer emits blocks in canonical order with
//! 17 significant digits, so parsing and writing again reproduces the bytes.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::complex::{ComplexError, GlueLabel, SimplicialComplex, TopSimplex};
use crate::metric::{DualityMetric, EuclideanMetric, MetricError, MetricKind, MetricStructure, ThurstonMetric, WeightedMetric};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// A well-formed document describing an invalid structure.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ValidationError {
    /// Short name of the violated invariant.
    pub invariant: String,
    /// Offending simplex as `(dimension, identifier)`, when there is one.
    pub simplex: Option<(usize, usize)>,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.invariant)?;
        if let Some((k, id)) = self.simplex {
            write!(f, " ({k}-simplex {id})")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl From<ComplexError> for ValidationError {
    fn from(e: ComplexError) -> Self {
        let invariant = match e {
            ComplexError::MalformedInput(_) => "malformed-complex",
            ComplexError::NonManifold(_) => "manifold",
            ComplexError::UnknownVertex(_) => "unknown-vertex",
        };
        ValidationError { invariant: invariant.into(), simplex: None, message: e.to_string() }
    }
}

impl From<MetricError> for ValidationError {
    fn from(e: MetricError) -> Self {
        let (invariant, simplex) = match &e {
            MetricError::NotRealizable { dim, id, .. } => ("realizability", Some((*dim, *id))),
            MetricError::Incompatible { triangle, .. } => ("compatibility", Some((2, *triangle))),
            MetricError::MissingLength { edge } | MetricError::MissingLocalLength { edge } => ("completeness", Some((1, *edge))),
            MetricError::MissingWeight { vertex } => ("completeness", Some((0, *vertex))),
            MetricError::LoopObstruction { .. } => ("loop", None),
            _ => ("metric", None),
        };
        ValidationError { invariant: invariant.into(), simplex, message: e.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("validation error: {0}")]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Clone)]
pub struct MeshDocument {
    pub complex: SimplicialComplex,
    pub metric: MetricStructure,
    /// Values per vertex identifier.
    pub function: Option<Vec<f64>>,
}

impl MeshDocument {
    pub fn new(complex: SimplicialComplex, metric: MetricStructure) -> Self {
        Self { complex, metric, function: None }
    }

    pub fn to_text(&self) -> String {
        write_mesh(&self.complex, &self.metric, self.function.as_deref())
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Serializes a structure; `f` is indexed by vertex identifier.
pub fn write_mesh(complex: &SimplicialComplex, metric: &MetricStructure, f: Option<&[f64]>) -> String {
    let mut out = String::new();
    let label = |v: usize| complex.vertex_label(v);
    let _ = writeln!(out, "dualmesh {FORMAT_VERSION}");
    let _ = writeln!(out, "dim {}", complex.dim());
    let _ = writeln!(out, "kind {}", metric.kind().name());
    let _ = writeln!(out, "vertices {}", complex.num_vertices());
    for top in complex.tops() {
        out.push_str("top");
        for c in &top.corners {
            let _ = write!(out, " {c}");
        }
        if let Some(glue) = &top.glue {
            out.push_str(" glue");
            for g in glue {
                let _ = write!(out, " {}", g.name);
                if let Some(p) = &g.perm {
                    let p: Vec<String> = p.iter().map(usize::to_string).collect();
                    let _ = write!(out, ":{}", p.join(","));
                }
            }
        }
        out.push('\n');
    }
    for e in 0..complex.num_edges() {
        let [a, b] = complex.edge_vertices(e);
        let _ = writeln!(out, "edge {e} {} {}", label(a), label(b));
    }
    let weights = |out: &mut String, w: &[f64]| {
        for (v, x) in w.iter().enumerate() {
            let _ = writeln!(out, "weight {} {}", label(v), num(*x));
        }
    };
    match metric {
        MetricStructure::Euclidean(m) => {
            for (e, l) in m.lengths.iter().enumerate() {
                let _ = writeln!(out, "len {e} {}", num(*l));
            }
        }
        MetricStructure::Weighted(m) => {
            for (e, l) in m.base.lengths.iter().enumerate() {
                let _ = writeln!(out, "len {e} {}", num(*l));
            }
            weights(&mut out, &m.weights);
        }
        MetricStructure::Thurston(m) => {
            weights(&mut out, &m.weights);
            for (e, c) in m.c.iter().enumerate() {
                let _ = writeln!(out, "c {e} {}", num(*c));
            }
        }
        MetricStructure::Duality(m) => {
            for (e, d) in m.local.iter().enumerate() {
                let _ = writeln!(out, "dloc {e} {} {}", num(d[0]), num(d[1]));
            }
        }
    }
    if let Some(f) = f {
        for (v, x) in f.iter().enumerate() {
            let _ = writeln!(out, "f {} {}", label(v), num(*x));
        }
    }
    out
}

struct Token<'a> {
    text: &'a str,
    column: usize,
}

struct Line<'a> {
    number: usize,
    tokens: Vec<Token<'a>>,
}

impl<'a> Line<'a> {
    fn err(&self, token: usize, message: impl Into<String>) -> ParseError {
        let column = self.tokens.get(token).map_or_else(|| self.tokens.last().map_or(1, |t| t.column + t.text.len()), |t| t.column);
        ParseError { line: self.number, column, message: message.into() }
    }

    fn keyword(&self) -> &'a str {
        self.tokens[0].text
    }

    fn arity(&self, n: usize) -> Result<(), ParseError> {
        if self.tokens.len() == n + 1 {
            Ok(())
        } else if self.tokens.len() <= n {
            Err(self.err(self.tokens.len(), format!("'{}' expects {n} values", self.keyword())))
        } else {
            Err(self.err(n + 1, format!("unexpected token after '{}' line", self.keyword())))
        }
    }

    fn uint(&self, i: usize) -> Result<usize, ParseError> {
        let t = self.tokens.get(i).ok_or_else(|| self.err(i, "missing integer"))?;
        t.text.parse().map_err(|_| self.err(i, format!("expected a nonnegative integer, found '{}'", t.text)))
    }

    fn real(&self, i: usize) -> Result<f64, ParseError> {
        let t = self.tokens.get(i).ok_or_else(|| self.err(i, "missing number"))?;
        match t.text.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(self.err(i, format!("expected a finite number, found '{}'", t.text))),
        }
    }
}

fn tokenize(text: &str) -> Vec<Line<'_>> {
    let mut lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = Vec::new();
        let mut start = None;
        for (pos, ch) in content.char_indices().chain(std::iter::once((content.len(), ' '))) {
            match (ch.is_whitespace(), start) {
                (false, None) => start = Some(pos),
                (true, Some(s)) => {
                    tokens.push(Token { text: &content[s..pos], column: content[..s].chars().count() + 1 });
                    start = None;
                }
                _ => {}
            }
        }
        if !tokens.is_empty() {
            lines.push(Line { number: i + 1, tokens });
        }
    }
    lines
}

/// Per-identifier slots that reject duplicates and report the declaring line.
struct Slots<T> {
    values: Vec<Option<T>>,
    what: &'static str,
}

impl<T: Clone> Slots<T> {
    fn new(n: usize, what: &'static str) -> Self {
        Self { values: vec![None; n], what }
    }

    fn set(&mut self, line: &Line<'_>, token: usize, id: usize, v: T) -> Result<(), ParseError> {
        match self.values.get_mut(id) {
            None => Err(line.err(token, format!("{} {id} is not declared", self.what))),
            Some(Some(_)) => Err(line.err(token, format!("{} {id} given twice", self.what))),
            Some(slot) => {
                *slot = Some(v);
                Ok(())
            }
        }
    }

    fn finish(self, keyword: &str, last_line: usize) -> Result<Vec<T>, ParseError> {
        self.values
            .into_iter()
            .enumerate()
            .map(|(id, v)| {
                v.ok_or_else(|| ParseError {
                    line: last_line,
                    column: 1,
                    message: format!("missing '{keyword}' line for {} {id}", self.what),
                })
            })
            .collect()
    }

    fn any(&self) -> bool {
        self.values.iter().any(Option::is_some)
    }
}

fn parse_glue(line: &Line<'_>, i: usize) -> Result<GlueLabel, ParseError> {
    let text = line.tokens[i].text;
    match text.split_once(':') {
        None => Ok(GlueLabel::new(text)),
        Some((name, perm)) => {
            if name.is_empty() {
                return Err(line.err(i, "empty glue label"));
            }
            let perm = perm
                .split(',')
                .map(|p| p.parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| line.err(i, format!("bad permutation in glue label '{text}'")))?;
            Ok(GlueLabel::with_perm(name, perm))
        }
    }
}

/// Parses a document and validates the structure it describes.
pub fn parse_mesh(text: &str) -> Result<MeshDocument, MeshError> {
    let lines = tokenize(text);
    let last_line = text.lines().count().max(1);
    let mut it = lines.iter().peekable();

    let mut header = |keyword: &str| -> Result<&Line<'_>, ParseError> {
        let line = it.next().ok_or(ParseError { line: last_line, column: 1, message: format!("missing '{keyword}' line") })?;
        if line.keyword() != keyword {
            return Err(line.err(0, format!("expected '{keyword}', found '{}'", line.keyword())));
        }
        line.arity(1)?;
        Ok(line)
    };
    let line = header("dualmesh")?;
    if line.uint(1)? != FORMAT_VERSION as usize {
        return Err(line.err(1, format!("unsupported format version (expected {FORMAT_VERSION})")).into());
    }
    let dim = header("dim")?.uint(1)?;
    let line = header("kind")?;
    let kind = MetricKind::from_name(line.tokens[1].text)
        .ok_or_else(|| line.err(1, format!("unknown structure kind '{}'", line.tokens[1].text)))?;
    let vertices_line = header("vertices")?;
    let vertex_count = vertices_line.uint(1)?;

    let mut tops = Vec::new();
    let mut first_metric_line = None;
    for line in it.by_ref() {
        if line.keyword() != "top" {
            first_metric_line = Some(line);
            break;
        }
        let glue_at = line.tokens.iter().position(|t| t.text == "glue");
        let corner_end = glue_at.unwrap_or(line.tokens.len());
        if corner_end - 1 != dim + 1 {
            return Err(line.err(corner_end.min(dim + 2), format!("a top simplex needs {} vertices", dim + 1)).into());
        }
        let corners = (1..corner_end).map(|i| line.uint(i)).collect::<Result<Vec<_>, _>>()?;
        let top = match glue_at {
            None => TopSimplex::plain(corners),
            Some(g) => {
                if line.tokens.len() - g - 1 != dim + 1 {
                    return Err(line.err(line.tokens.len().min(g + dim + 2), format!("a glued top simplex needs {} labels", dim + 1)).into());
                }
                let glue = (g + 1..line.tokens.len()).map(|i| parse_glue(line, i)).collect::<Result<Vec<_>, _>>()?;
                TopSimplex::glued(corners, glue)
            }
        };
        tops.push(top);
    }
    if tops.is_empty() {
        return Err(ParseError { line: first_metric_line.map_or(last_line, |l| l.number), column: 1, message: "no 'top' lines".into() }.into());
    }
    let complex = SimplicialComplex::build(dim, tops).map_err(ValidationError::from)?;
    if complex.num_vertices() != vertex_count {
        return Err(ValidationError {
            invariant: "vertex-count".into(),
            simplex: None,
            message: format!("header declares {vertex_count} vertices, the simplices use {}", complex.num_vertices()),
        }
        .into());
    }
    let nv = complex.num_vertices();
    let ne = complex.num_edges();
    let vertex = |line: &Line<'_>, i: usize| -> Result<usize, ParseError> {
        let l = line.uint(i)?;
        complex.vertex_by_label(l).ok_or_else(|| line.err(i, format!("vertex {l} is not declared")))
    };

    let mut edges = Slots::new(ne, "edge");
    let mut lengths = Slots::new(ne, "edge");
    let mut weights = Slots::new(nv, "vertex");
    let mut cs = Slots::new(ne, "edge");
    let mut dloc = Slots::new(ne, "edge");
    let mut function = Slots::new(nv, "vertex");
    let allowed: &[&str] = match kind {
        MetricKind::Euclidean => &["len"],
        MetricKind::Weighted => &["len", "weight"],
        MetricKind::Thurston => &["weight", "c"],
        MetricKind::Duality => &["dloc"],
    };
    let mut section = 0;
    for line in first_metric_line.into_iter().chain(it) {
        let kw = line.keyword();
        let order = match kw {
            "edge" => 0,
            "f" => 2,
            k if allowed.contains(&k) => 1,
            "len" | "weight" | "c" | "dloc" => {
                return Err(line.err(0, format!("'{kw}' lines do not belong to a {} structure", kind.name())).into());
            }
            "top" => return Err(line.err(0, "'top' lines must precede all other blocks").into()),
            _ => return Err(line.err(0, format!("unknown keyword '{kw}'")).into()),
        };
        if order < section {
            return Err(line.err(0, format!("'{kw}' line out of order")).into());
        }
        section = order;
        match kw {
            "edge" => {
                line.arity(3)?;
                let e = line.uint(1)?;
                let ends = [vertex(line, 2)?, vertex(line, 3)?];
                if e < ne && complex.edge_vertices(e) != ends {
                    let [a, b] = complex.edge_vertices(e);
                    return Err(ValidationError {
                        invariant: "edge-orientation".into(),
                        simplex: Some((1, e)),
                        message: format!(
                            "line {}: edge {e} runs from vertex {} to vertex {}",
                            line.number,
                            complex.vertex_label(a),
                            complex.vertex_label(b)
                        ),
                    }
                    .into());
                }
                edges.set(line, 1, e, ())?;
            }
            "len" => {
                line.arity(2)?;
                lengths.set(line, 1, line.uint(1)?, line.real(2)?)?;
            }
            "c" => {
                line.arity(2)?;
                cs.set(line, 1, line.uint(1)?, line.real(2)?)?;
            }
            "dloc" => {
                line.arity(3)?;
                dloc.set(line, 1, line.uint(1)?, [line.real(2)?, line.real(3)?])?;
            }
            "weight" => {
                line.arity(2)?;
                weights.set(line, 1, vertex(line, 1)?, line.real(2)?)?;
            }
            "f" => {
                line.arity(2)?;
                function.set(line, 1, vertex(line, 1)?, line.real(2)?)?;
            }
            _ => unreachable!(),
        }
    }
    edges.finish("edge", last_line)?;
    let metric = match kind {
        MetricKind::Euclidean => MetricStructure::Euclidean(EuclideanMetric::new(lengths.finish("len", last_line)?)),
        MetricKind::Weighted => MetricStructure::Weighted(WeightedMetric::new(
            lengths.finish("len", last_line)?,
            weights.finish("weight", last_line)?,
        )),
        MetricKind::Thurston => {
            MetricStructure::Thurston(ThurstonMetric::new(weights.finish("weight", last_line)?, cs.finish("c", last_line)?))
        }
        MetricKind::Duality => MetricStructure::Duality(DualityMetric::new(dloc.finish("dloc", last_line)?)),
    };
    let function = if function.any() { Some(function.finish("f", last_line)?) } else { None };
    metric.validate(&complex).map_err(ValidationError::from)?;
    Ok(MeshDocument { complex, metric, function })
}

/// Parses a standalone function file of `f <vertex label> <value>` lines.
pub fn parse_function(text: &str, complex: &SimplicialComplex) -> Result<Vec<f64>, ParseError> {
    let mut values = Slots::new(complex.num_vertices(), "vertex");
    for line in tokenize(text) {
        if line.keyword() != "f" {
            return Err(line.err(0, format!("expected 'f', found '{}'", line.keyword())));
        }
        line.arity(2)?;
        let l = line.uint(1)?;
        let v = complex.vertex_by_label(l).ok_or_else(|| line.err(1, format!("vertex {l} is not declared")))?;
        values.set(&line, 1, v, line.real(2)?)?;
    }
    values.finish("f", text.lines().count().max(1))
}

/// Serializes a function as `f <vertex label> <value>` lines.
pub fn write_function(complex: &SimplicialComplex, f: &[f64]) -> String {
    f.iter().enumerate().map(|(v, x)| format!("f {} {}\n", complex.vertex_label(v), num(*x))).collect()
}
