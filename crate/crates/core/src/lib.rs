//! Fitting unions of smooth convex polytopes to solids, and turning the
//! fitted half-spaces back into exact meshes.
//!
//! A [`Decomposition`] holds `K` convex elements, each the intersection of `H`
//! half-spaces smoothed with a log-sum-exp. [`optimizer::fit`] trains one
//! against a [`sampling::TargetOracle`]; [`extraction`] recovers polytope
//! meshes by double duality and convex hulls; [`metrics`] and
//! [`marching_cubes`] support evaluation.

pub mod error;
pub mod extraction;
pub mod geometry;
pub mod hull;
pub mod losses;
pub mod marching_cubes;
mod mc_table;
pub mod mesh;
pub mod metrics;
pub mod optimizer;
pub mod params;
pub mod persist;
pub mod sampling;

pub use error::{Error, Result};
pub use geometry::{
    sigmoid, ConvexElement, Decomposition, Hyperplane, Point, PreparedElement, SdfMode, UnionEvaluator,
};
pub use losses::{LossBatch, LossTerms, LossWeights};
pub use metrics::MetricsReport;
pub use optimizer::{fit, FitConfig, FitReport};
pub use persist::{AnyDecomposition, DecompositionFile};
pub use mesh::{Polygon, TriMesh};
pub use sampling::{Aabb, SampleSet, SampleSource, TargetOracle};
