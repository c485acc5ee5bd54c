//! Multimodal deception detection.
//!
//! Per-modality feature extractors (text CNN, audio reducer, 3D video CNN,
//! binary micro-expression flags) feed a fusion operator and an MLP
//! classifier trained with base-2 cross-entropy. Every layer carries its own
//! hand-written backward pass; [`gradcheck`] verifies them against central
//! differences. [`evaluation`] runs subject-wise cross-validation and
//! [`data`] loads manifests or generates synthetic datasets with a planted
//! signal.

mod error;
pub mod artifact;
pub mod classifier;
pub mod data;
pub mod evaluation;
pub mod extractors;
pub mod fusion;
pub mod gradcheck;
pub mod model;
pub mod nn;
pub mod tensor;
pub mod training;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use tensor::{concat, hadamard, matmul, Tensor};
