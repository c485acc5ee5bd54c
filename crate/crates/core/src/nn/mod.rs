//! Layers with hand-derived backward passes.
//!
//! Every layer follows the same protocol: `forward` is a pure evaluation-mode
//! pass, `forward_train` additionally records what the backward pass needs,
//! and `backward` consumes that record, accumulates parameter gradients into
//! the [`Param`] slots and returns the gradient with respect to the input.
//! Calling `backward` without a recorded forward pass is an error.

mod activation;
mod conv1d;
mod conv3d;
mod dense;
mod pool;

pub use activation::{dropout_apply, relu, relu_backward, softmax, Dropout, DropoutSpec, Relu};
pub use conv1d::Conv1DSeqLayer;
pub use conv3d::Conv3DLayer;
pub use dense::DenseLayer;
pub use pool::{maxpool1d, maxpool3d, MaxPool1d, MaxPool3d};

use rand::Rng;

use crate::{Error, Result, Tensor};

/// Train or eval behaviour for layers that differ between the two (dropout).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A learnable tensor with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
    /// Frozen parameters never receive gradients and are skipped by SGD.
    pub frozen: bool,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param {
            value,
            grad,
            frozen: false,
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }

    pub fn shape(&self) -> &[usize] {
        self.value.shape()
    }
}

/// Anything owning learnable parameters, visited in declaration order.
pub trait Parameterized {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}

/// Uniform initialisation in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng + ?Sized>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-limit..=limit)).collect();
    Tensor::new(shape.to_vec(), data).expect("glorot_uniform: shape/data length agree")
}

pub(crate) fn take_cache<T>(cache: &mut Option<T>, layer: &'static str) -> Result<T> {
    cache.take().ok_or(Error::BackwardBeforeForward { layer })
}
