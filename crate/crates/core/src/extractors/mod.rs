//! Per-modality feature pipelines producing the visual, textual, audio and
//! micro-expression feature vectors.

mod audio;
mod text;
mod visual;

pub use audio::AudioReducer;
pub use text::{TextConfig, TextExtractor, TextMode};
pub use visual::{VisualConfig, VisualExtractor};

use crate::{Error, Result, Tensor};

/// Output width of every learned extractor.
pub const FEATURE_DIM: usize = 300;
/// Length of an IS13-ComParE acoustic functional vector.
pub const AUDIO_DIM: usize = 6373;
/// Number of annotated facial micro-expressions.
pub const MICRO_DIM: usize = 39;

/// 39 binary micro-expression indicators.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MicroExpressionVector(Vec<bool>);

impl MicroExpressionVector {
    pub fn indicators(&self) -> &[bool] {
        &self.0
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::vector(self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
            .expect("micro-expression vector is never empty")
    }
}

/// Accepts exactly 39 values, each 0 or 1.
pub fn validate_micro(raw: &[f64]) -> Result<MicroExpressionVector> {
    if raw.len() != MICRO_DIM {
        return Err(Error::invalid(
            "micro-expressions",
            format!("expected {MICRO_DIM} values, got {}", raw.len()),
        ));
    }
    raw.iter()
        .enumerate()
        .map(|(i, &v)| match v {
            0.0 => Ok(false),
            1.0 => Ok(true),
            _ => Err(Error::invalid(
                "micro-expressions",
                format!("entry {i} is {v}, expected 0 or 1"),
            )),
        })
        .collect::<Result<Vec<bool>>>()
        .map(MicroExpressionVector)
}
