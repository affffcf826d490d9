//! Duality triangulations on piecewise-Euclidean manifolds.
//!
//! A triangulated manifold ([`complex`]) carries one of four metric
//! structures ([`metric`]). From a duality structure the crate computes
//! centers of every simplex and the signed volumes of the geometric dual
//! cells ([`geometry`]), tests and restores local regularity by edge flips
//! ([`regularity`]), and assembles the induced discrete Laplacian together
//! with its solvers ([`laplace`]). Meshes are read and written in a small
//! text format ([`io`]); [`fixtures`] generates deterministic test meshes.

pub mod complex;
pub mod fixtures;
pub mod geometry;
pub mod io;
pub mod laplace;
pub mod metric;
pub mod par;
pub mod regularity;

pub use complex::{ComplexError, GlueLabel, Hinge, SimplicialComplex, TopSimplex};
pub use geometry::{DualGeometry, GeometryError, HingeEmbedding, SimplexEmbedding};
pub use laplace::{LaplaceError, LaplaceSystem};
pub use metric::{
    DualityMetric, EuclideanMetric, MetricError, MetricStructure, ThurstonMetric, WeightedMetric,
};
pub use par::Execution;
pub use regularity::{regularize, FlipRecord, RegularityError, RegularizeOptions, RegularizeResult};
pub use io::{parse_mesh, write_mesh, MeshDocument, MeshError};
