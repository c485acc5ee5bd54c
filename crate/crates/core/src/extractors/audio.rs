use rand::Rng;

use super::{AUDIO_DIM, FEATURE_DIM};
use crate::nn::{relu, DenseLayer, Param, Parameterized, Relu};
use crate::{Error, Result, Tensor};

/// Fully-connected 6373 → 300 reducer with ReLU, trained with the classifier.
#[derive(Debug, Clone)]
pub struct AudioReducer {
    pub dense: DenseLayer,
    relu: Relu,
}

impl AudioReducer {
    pub fn new<R: Rng + ?Sized>(rng: &mut R) -> Self {
        AudioReducer {
            dense: DenseLayer::new(AUDIO_DIM, FEATURE_DIM, rng),
            relu: Relu::new(),
        }
    }

    fn check(a: &Tensor) -> Result<()> {
        if a.rank() != 1 || a.len() != AUDIO_DIM {
            return Err(Error::invalid(
                "reduce_audio",
                format!("expected {AUDIO_DIM} acoustic features, got shape {:?}", a.shape()),
            ));
        }
        Ok(())
    }

    pub fn forward(&self, a: &Tensor) -> Result<Tensor> {
        Self::check(a)?;
        Ok(relu(&self.dense.forward(a)?))
    }

    pub fn forward_train(&mut self, a: &Tensor) -> Result<Tensor> {
        Self::check(a)?;
        let h = self.dense.forward_train(a)?;
        Ok(self.relu.forward_train(&h))
    }

    pub fn backward(&mut self, grad: &Tensor) -> Result<()> {
        let g = self.relu.backward(grad)?;
        self.dense.backward_params(&g)
    }
}

impl Parameterized for AudioReducer {
    fn params(&self) -> Vec<&Param> {
        self.dense.params()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.dense.params_mut()
    }
}
