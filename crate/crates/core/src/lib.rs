//! Affordance field transfer for task-oriented handovers.
//!
//! The crate takes a novel, possibly partial point cloud plus a natural
//! language object/task request, retrieves a proxy exemplar from a small
//! annotated database, aligns the query into the exemplar frame, transfers
//! the exemplar's human-grasp heatmap point-to-point via spectral shape
//! descriptors, and selects a parallel-jaw robot grasp that stays clear of
//! the predicted human grasp region.
//!
//! All numeric code is generic over the scalar type through [`Real`]
//! (`f32` or `f64`); concrete aliases for the common types live at the
//! crate root.

pub mod affordance;
pub mod alignment;
pub mod correspondence;
pub mod error;
pub mod evalkit;
pub mod geometry;
pub mod grasp;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod real;
pub mod reasoner;
pub mod spectral;

pub use error::{Error, Result, Stage};
pub use real::Real;

pub type PointCloud32 = geometry::PointCloud<f32>;
pub type PointCloud64 = geometry::PointCloud<f64>;
pub type RigidTransform32 = geometry::RigidTransform<f32>;
pub type RigidTransform64 = geometry::RigidTransform<f64>;
