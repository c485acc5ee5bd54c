use rand::Rng;
use serde::{Deserialize, Serialize};

use super::FEATURE_DIM;
use crate::nn::{relu, Conv3DLayer, DenseLayer, MaxPool3d, Param, Parameterized, Relu};
use crate::{Error, Result, Tensor};

/// Geometry of the visual branch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisualConfig {
    /// `(channels, frames, height, width)` of every input video.
    pub input_shape: [usize; 4],
    pub maps: usize,
    /// `(depth, height, width)` of each 3D filter.
    pub kernel: [usize; 3],
    pub pool: usize,
}

impl VisualConfig {
    /// 32 maps of 5×5×5 RGB filters, pool 3, over 16 frames of 64×64.
    pub fn full() -> Self {
        VisualConfig {
            input_shape: [3, 16, 64, 64],
            maps: 32,
            kernel: [5, 5, 5],
            pool: 3,
        }
    }

    /// Shape after convolution and pooling, before flattening.
    pub fn pooled_shape(&self) -> Result<[usize; 4]> {
        let [_, f, h, w] = self.input_shape;
        let [kd, kh, kw] = self.kernel;
        if f < kd || h < kh || w < kw {
            return Err(Error::invalid(
                "visual extractor",
                format!("filter {:?} larger than input {:?}", self.kernel, self.input_shape),
            ));
        }
        let conv = [f - kd + 1, h - kh + 1, w - kw + 1];
        if self.pool == 0 || conv.iter().any(|&d| d < self.pool) {
            return Err(Error::invalid(
                "visual extractor",
                format!("pool window {} larger than convolution output {conv:?}", self.pool),
            ));
        }
        Ok([
            self.maps,
            conv[0] / self.pool,
            conv[1] / self.pool,
            conv[2] / self.pool,
        ])
    }
}

/// conv3d → max-pool → flatten → dense(300) → ReLU.
#[derive(Debug, Clone)]
pub struct VisualExtractor {
    config: VisualConfig,
    pub conv: Conv3DLayer,
    pool: MaxPool3d,
    pub dense: DenseLayer,
    relu: Relu,
    pooled_shape: [usize; 4],
}

impl VisualExtractor {
    pub fn new<R: Rng + ?Sized>(config: VisualConfig, rng: &mut R) -> Result<Self> {
        let pooled_shape = config.pooled_shape()?;
        let conv = Conv3DLayer::new(config.maps, config.input_shape[0], config.kernel, rng);
        let dense = DenseLayer::new(pooled_shape.iter().product(), FEATURE_DIM, rng);
        Ok(VisualExtractor {
            pool: MaxPool3d::new(config.pool),
            config,
            conv,
            dense,
            relu: Relu::new(),
            pooled_shape,
        })
    }

    pub fn config(&self) -> &VisualConfig {
        &self.config
    }

    fn check(&self, video: &Tensor) -> Result<()> {
        if video.shape() != self.config.input_shape {
            return Err(Error::ShapeMismatch {
                op: "extract_visual",
                left: self.config.input_shape.to_vec(),
                right: video.shape().to_vec(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, video: &Tensor) -> Result<Tensor> {
        self.check(video)?;
        let pooled = self.pool.forward(&self.conv.forward(video)?)?;
        Ok(relu(&self.dense.forward(&pooled.flatten())?))
    }

    pub fn forward_train(&mut self, video: &Tensor) -> Result<Tensor> {
        self.check(video)?;
        let conv = self.conv.forward_train(video)?;
        let pooled = self.pool.forward_train(&conv)?;
        let hidden = self.dense.forward_train(&pooled.flatten())?;
        Ok(self.relu.forward_train(&hidden))
    }

    /// Backpropagates `dL/dv_f` into the branch parameters.
    pub fn backward(&mut self, grad: &Tensor) -> Result<()> {
        let g = self.relu.backward(grad)?;
        let g = self.dense.backward(&g)?;
        let g = g.reshape(self.pooled_shape.to_vec())?;
        let g = self.pool.backward(&g)?;
        self.conv.backward_params(&g)
    }
}

impl Parameterized for VisualExtractor {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.conv.params();
        p.extend(self.dense.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.conv.params_mut();
        p.extend(self.dense.params_mut());
        p
    }
}
