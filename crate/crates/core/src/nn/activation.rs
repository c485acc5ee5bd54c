use rand::Rng;

use super::{take_cache, Mode};
use crate::tensor::check_same_shape;
use crate::{Error, Result, Tensor};

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Gradient of ReLU given the forward input; the subgradient at 0 is 0.
pub fn relu_backward(input: &Tensor, grad_out: &Tensor) -> Result<Tensor> {
    check_same_shape("relu_backward", input, grad_out)?;
    let data = input
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
        .collect();
    Tensor::new(input.shape().to_vec(), data)
}

/// Numerically stable softmax over a rank-1 tensor.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    if logits.rank() != 1 {
        return Err(Error::invalid(
            "softmax",
            format!("expected rank 1, got {:?}", logits.shape()),
        ));
    }
    let max = logits.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.data().iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Tensor::vector(exps.into_iter().map(|e| e / sum).collect())
}

/// ReLU that remembers its input for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Relu {
    input: Option<Tensor>,
}

impl Relu {
    pub fn new() -> Self {
        Relu::default()
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Tensor {
        let y = relu(x);
        self.input = Some(x.clone());
        y
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let x = take_cache(&mut self.input, "relu")?;
        relu_backward(&x, grad_out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutSpec {
    pub keep_prob: f64,
    pub mode: Mode,
}

impl DropoutSpec {
    pub fn new(keep_prob: f64, mode: Mode) -> Result<Self> {
        if !(keep_prob > 0.0 && keep_prob <= 1.0) {
            return Err(Error::invalid(
                "dropout",
                format!("keep probability must lie in (0, 1], got {keep_prob}"),
            ));
        }
        Ok(DropoutSpec { keep_prob, mode })
    }
}

fn sample_mask<R: Rng + ?Sized>(n: usize, keep_prob: f64, rng: &mut R) -> Vec<f64> {
    let scale = 1.0 / keep_prob;
    (0..n)
        .map(|_| if rng.random::<f64>() < keep_prob { scale } else { 0.0 })
        .collect()
}

/// Inverted dropout: in train mode each element survives with probability
/// `keep_prob` and is scaled by `1/keep_prob`; eval mode is the identity.
pub fn dropout_apply<R: Rng + ?Sized>(x: &Tensor, spec: DropoutSpec, rng: &mut R) -> Result<Tensor> {
    let spec = DropoutSpec::new(spec.keep_prob, spec.mode)?;
    if spec.mode == Mode::Eval {
        return Ok(x.clone());
    }
    let mask = sample_mask(x.len(), spec.keep_prob, rng);
    let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
    Tensor::new(x.shape().to_vec(), data)
}

/// Dropout layer recording its mask between forward and backward.
#[derive(Debug, Clone)]
pub struct Dropout {
    keep_prob: f64,
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(keep_prob: f64) -> Result<Self> {
        DropoutSpec::new(keep_prob, Mode::Train)?;
        Ok(Dropout {
            keep_prob,
            mask: None,
        })
    }

    pub fn keep_prob(&self) -> f64 {
        self.keep_prob
    }

    pub fn forward_train<R: Rng + ?Sized>(&mut self, x: &Tensor, rng: &mut R) -> Tensor {
        let mask = sample_mask(x.len(), self.keep_prob, rng);
        let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        self.mask = Some(mask);
        Tensor::new(x.shape().to_vec(), data).expect("shape preserved")
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let mask = take_cache(&mut self.mask, "dropout")?;
        if mask.len() != grad_out.len() {
            return Err(Error::ShapeMismatch {
                op: "dropout_backward",
                left: vec![mask.len()],
                right: grad_out.shape().to_vec(),
            });
        }
        let data = grad_out.data().iter().zip(&mask).map(|(g, m)| g * m).collect();
        Tensor::new(grad_out.shape().to_vec(), data)
    }
}
