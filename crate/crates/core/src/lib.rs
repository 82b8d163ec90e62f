//! Transductive one-shot inference over fixed embeddings.
//!
//! The crate fine-tunes class prototypes with an information-maximization
//! loss, optionally through a learnable norm-induced feature transformation,
//! and ships the tools used to check the K-means / entropy bound relationships
//! that motivate the transformation numerically.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the precision used by the command-line tools.

pub mod analysis;
pub mod error;
pub mod features;
pub mod linalg;
pub mod scalar;
pub mod tim;
pub mod transform;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type FeatureBank64 = features::FeatureBank<f64>;
pub type Episode64 = features::Episode<f64>;
pub type Task64 = features::Task<f64>;
pub type TransformMatrix64 = transform::TransformMatrix<f64>;
pub type SolverState64 = tim::SolverState<f64>;

pub type FeatureBank32 = features::FeatureBank<f32>;
pub type Episode32 = features::Episode<f32>;
pub type Task32 = features::Task<f32>;
pub type TransformMatrix32 = transform::TransformMatrix<f32>;
pub type SolverState32 = tim::SolverState<f32>;
