//! Steerable implicit shape model: an auto-decoder MLP over signed distance
//! fields whose latent codes carry fixed anatomical features next to
//! trainable dimensions.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common choices.

pub mod autodiff;
pub mod dataset;
pub mod error;
pub mod generation;
pub mod mesh;
pub mod metrics;
pub mod model;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor = autodiff::Tensor2<f64>;
pub type Mesh = mesh::TriMesh<f64>;
pub type Model = model::ModelParams<f64>;
pub type Model32 = model::ModelParams<f32>;
pub type Code = model::LatentCode<f64>;
