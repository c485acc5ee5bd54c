use rand::Rng;

use super::{glorot_uniform, take_cache, Param, Parameterized};
use crate::tensor::{axpy, dot, expect_rank};
use crate::{Error, Result, Tensor};

/// Fully-connected layer `y = W·x + b`, `W` stored as `out_dim × in_dim`.
#[derive(Debug, Clone)]
pub struct DenseLayer {
    pub weight: Param,
    pub bias: Param,
    input: Option<Tensor>,
}

impl DenseLayer {
    pub fn new<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let w = glorot_uniform(&[out_dim, in_dim], in_dim, out_dim, rng);
        DenseLayer::from_parts(w, Tensor::zeros(&[out_dim])).expect("consistent shapes")
    }

    pub fn from_parts(weight: Tensor, bias: Tensor) -> Result<Self> {
        expect_rank("dense", &weight, 2)?;
        expect_rank("dense", &bias, 1)?;
        if weight.shape()[0] != bias.len() {
            return Err(Error::ShapeMismatch {
                op: "dense",
                left: weight.shape().to_vec(),
                right: bias.shape().to_vec(),
            });
        }
        Ok(DenseLayer {
            weight: Param::new(weight),
            bias: Param::new(bias),
            input: None,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.rank() != 1 || x.len() != self.in_dim() {
            return Err(Error::ShapeMismatch {
                op: "dense_forward",
                left: self.weight.shape().to_vec(),
                right: x.shape().to_vec(),
            });
        }
        let n = self.in_dim();
        let w = self.weight.value.data();
        let out = self
            .bias
            .value
            .data()
            .iter()
            .enumerate()
            .map(|(r, b)| dot(&w[r * n..(r + 1) * n], x.data()) + b)
            .collect();
        Tensor::vector(out)
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        let y = self.forward(x)?;
        self.input = Some(x.clone());
        Ok(y)
    }

    /// Accumulates parameter gradients and returns `dL/dx`.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        self.backward_params_inner(grad_out)?;
        let n = self.in_dim();
        let w = self.weight.value.data();
        let mut grad_in = vec![0.0; n];
        for (r, &g) in grad_out.data().iter().enumerate() {
            if g != 0.0 {
                axpy(g, &w[r * n..(r + 1) * n], &mut grad_in);
            }
        }
        Tensor::vector(grad_in)
    }

    /// Like [`backward`](Self::backward) but skips the input gradient, for
    /// layers fed directly by data.
    pub fn backward_params(&mut self, grad_out: &Tensor) -> Result<()> {
        self.backward_params_inner(grad_out)
    }

    fn backward_params_inner(&mut self, grad_out: &Tensor) -> Result<()> {
        let x = take_cache(&mut self.input, "dense")?;
        if grad_out.rank() != 1 || grad_out.len() != self.out_dim() {
            return Err(Error::ShapeMismatch {
                op: "dense_backward",
                left: vec![self.out_dim()],
                right: grad_out.shape().to_vec(),
            });
        }
        let n = self.in_dim();
        let gw = self.weight.grad.data_mut();
        let gb = self.bias.grad.data_mut();
        for (r, &g) in grad_out.data().iter().enumerate() {
            gb[r] += g;
            if g != 0.0 {
                axpy(g, x.data(), &mut gw[r * n..(r + 1) * n]);
            }
        }
        Ok(())
    }
}

impl Parameterized for DenseLayer {
    fn params(&self) -> Vec<&Param> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.weight, &mut self.bias]
    }
}
