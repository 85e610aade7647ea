//! Core data model for language-conditioned traffic scenario generation.
//!
//! Geometry and the metric kernels are generic over [`Scalar`] (`f32` or `f64`);
//! the scenario data model itself stores `f64`, matching the on-disk documents.

pub mod code;
pub mod document;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod retrieval;
pub mod scalar;
pub mod scenario;
pub mod synthetic;

pub use error::{Result, ScenarioError};
pub use scalar::Scalar;

pub type Point = geometry::Vec2<f64>;
pub type Pose = geometry::Pose2<f64>;
pub type Transform = geometry::RigidTransform<f64>;
pub type Point32 = geometry::Vec2<f32>;
pub type Pose32 = geometry::Pose2<f32>;
pub type Box2 = eval::OrientedBox<f64>;
pub type Box2F32 = eval::OrientedBox<f32>;
