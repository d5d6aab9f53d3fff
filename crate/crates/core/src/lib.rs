//! Mode clustering diagrams.
//!
//! Each sample point gets a kernel density value and δ, its distance to the
//! nearest point of higher density. Plotted against each other these form the
//! mode diagram: ordinary points follow a straight line in log-log
//! coordinates, and modes stand out far above it. A robust line fit with an
//! `M · s` margin picks the modes, and every other point inherits the cluster
//! of the first mode reached along its nearest-higher-density links.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! at the crate root fix the common choices.
//!
//! ```
//! use modediag::{pipeline, synthgen::{generate, Shape, ShapeSpec}};
//!
//! let data = generate(&ShapeSpec::new(Shape::TwoBlobs, 400).with_seed(1)).unwrap();
//! let out = pipeline::run(&data.points, &pipeline::PipelineConfig::default()).unwrap();
//! assert_eq!(out.clusters.n_clusters(), 2);
//! ```

// Negated comparisons are used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clusterer;
pub mod delta;
pub mod density;
pub mod diagram;
pub mod error;
pub mod io;
mod kdtree;
pub mod meanshift;
pub mod pipeline;
pub mod points;
pub mod robustfit;
mod scalar;
pub mod synthgen;
pub mod theoryval;

pub use clusterer::{adjusted_rand_index, assign_clusters, ClusterResult};
pub use delta::{compute_delta_bruteforce, compute_delta_indexed, DeltaTable, RootDelta};
pub use density::{auto_bandwidth, kde_at, kde_self, Bandwidth, DensityEstimate};
pub use diagram::{bootstrap_diagram, build_diagram, trim_low_density, ModeDiagram};
pub use error::{Error, Result};
pub use points::{diameter, pairwise_distance, Diameter, PointSet};
pub use robustfit::{
    fit_robust, mode_diagnostic, select_modes, threshold_value, RobustFit, ThresholdFunction,
};
pub use scalar::{median_in_place, squared_distance, Scalar};

pub type PointSetF64 = PointSet<f64>;
pub type PointSetF32 = PointSet<f32>;
pub type BandwidthF64 = Bandwidth<f64>;
pub type BandwidthF32 = Bandwidth<f32>;
pub type DensityEstimateF64 = DensityEstimate<f64>;
pub type DensityEstimateF32 = DensityEstimate<f32>;
pub type DeltaTableF64 = DeltaTable<f64>;
pub type DeltaTableF32 = DeltaTable<f32>;
pub type ModeDiagramF64 = ModeDiagram<f64>;
pub type ModeDiagramF32 = ModeDiagram<f32>;
pub type RobustFitF64 = RobustFit<f64>;
pub type RobustFitF32 = RobustFit<f32>;
pub type ThresholdFunctionF64 = ThresholdFunction<f64>;
pub type ThresholdFunctionF32 = ThresholdFunction<f32>;
pub type ClusterResultF64 = ClusterResult<f64>;
pub type ClusterResultF32 = ClusterResult<f32>;
