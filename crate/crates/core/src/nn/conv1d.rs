use rand::Rng;

use super::{glorot_uniform, take_cache, Param, Parameterized};
use crate::tensor::{axpy, expect_rank};
use crate::{Error, Result, Tensor};

/// Sentence convolution: for each filter width `w`, a bank of filters
/// `(maps, w, depth)` slides along the token axis of an `L × depth` matrix,
/// each filter spanning the whole embedding depth.
#[derive(Debug, Clone)]
pub struct Conv1DSeqLayer {
    widths: Vec<usize>,
    depth: usize,
    /// One filter bank per width, shape `(maps, w, depth)`.
    pub filters: Vec<Param>,
    /// One bias vector per width, shape `(maps)`.
    pub biases: Vec<Param>,
    input: Option<Tensor>,
}

impl Conv1DSeqLayer {
    pub fn new<R: Rng + ?Sized>(widths: &[usize], maps: usize, depth: usize, rng: &mut R) -> Self {
        let mut filters = Vec::new();
        let mut biases = Vec::new();
        for &w in widths {
            filters.push(glorot_uniform(&[maps, w, depth], w * depth, maps * w, rng));
            biases.push(Tensor::zeros(&[maps]));
        }
        Conv1DSeqLayer::from_parts(filters, biases).expect("consistent shapes")
    }

    pub fn from_parts(filters: Vec<Tensor>, biases: Vec<Tensor>) -> Result<Self> {
        if filters.is_empty() || filters.len() != biases.len() {
            return Err(Error::invalid(
                "conv1d_seq",
                format!("{} filter banks but {} bias vectors", filters.len(), biases.len()),
            ));
        }
        let mut widths = Vec::new();
        let depth = filters[0].shape().get(2).copied().unwrap_or(0);
        for (f, b) in filters.iter().zip(&biases) {
            expect_rank("conv1d_seq", f, 3)?;
            expect_rank("conv1d_seq", b, 1)?;
            if f.shape()[0] != b.len() || f.shape()[2] != depth {
                return Err(Error::ShapeMismatch {
                    op: "conv1d_seq",
                    left: f.shape().to_vec(),
                    right: b.shape().to_vec(),
                });
            }
            widths.push(f.shape()[1]);
        }
        Ok(Conv1DSeqLayer {
            widths,
            depth,
            filters: filters.into_iter().map(Param::new).collect(),
            biases: biases.into_iter().map(Param::new).collect(),
            input: None,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn maps(&self, bank: usize) -> usize {
        self.filters[bank].shape()[0]
    }

    fn check_input(&self, tokens: &Tensor) -> Result<usize> {
        if tokens.rank() != 2 || tokens.shape()[1] != self.depth {
            return Err(Error::ShapeMismatch {
                op: "conv1d_seq_forward",
                left: vec![self.widths.iter().copied().max().unwrap_or(0), self.depth],
                right: tokens.shape().to_vec(),
            });
        }
        let len = tokens.shape()[0];
        let widest = self.widths.iter().copied().max().unwrap_or(0);
        if len < widest {
            return Err(Error::invalid(
                "conv1d_seq_forward",
                format!("sequence of {len} tokens is shorter than filter width {widest}"),
            ));
        }
        Ok(len)
    }

    /// One `(maps, L − w + 1)` feature-map tensor per width, in width order.
    pub fn forward(&self, tokens: &Tensor) -> Result<Vec<Tensor>> {
        let len = self.check_input(tokens)?;
        let d = self.depth;
        let x = tokens.data();
        let mut out = Vec::with_capacity(self.widths.len());
        for (bank, &w) in self.widths.iter().enumerate() {
            let maps = self.maps(bank);
            let span = w * d;
            let steps = len - w + 1;
            let wt = self.filters[bank].value.data();
            let bias = self.biases[bank].value.data();
            let mut data = Vec::with_capacity(maps * steps);
            for m in 0..maps {
                let filt = &wt[m * span..(m + 1) * span];
                for t in 0..steps {
                    let window = &x[t * d..t * d + span];
                    let mut acc = bias[m];
                    for (a, b) in filt.iter().zip(window) {
                        acc += a * b;
                    }
                    data.push(acc);
                }
            }
            out.push(Tensor::new(vec![maps, steps], data)?);
        }
        Ok(out)
    }

    pub fn forward_train(&mut self, tokens: &Tensor) -> Result<Vec<Tensor>> {
        let y = self.forward(tokens)?;
        self.input = Some(tokens.clone());
        Ok(y)
    }

    /// Accumulates parameter gradients and returns `dL/dtokens`.
    pub fn backward(&mut self, grad_out: &[Tensor]) -> Result<Tensor> {
        let x = take_cache(&mut self.input, "conv1d_seq")?;
        let len = x.shape()[0];
        let d = self.depth;
        if grad_out.len() != self.widths.len() {
            return Err(Error::invalid(
                "conv1d_seq_backward",
                format!("expected {} gradient maps, got {}", self.widths.len(), grad_out.len()),
            ));
        }
        let mut gx = vec![0.0; x.len()];
        for (bank, &w) in self.widths.iter().enumerate() {
            let maps = self.maps(bank);
            let span = w * d;
            let steps = len - w + 1;
            let g = &grad_out[bank];
            if g.shape() != [maps, steps] {
                return Err(Error::ShapeMismatch {
                    op: "conv1d_seq_backward",
                    left: vec![maps, steps],
                    right: g.shape().to_vec(),
                });
            }
            let filt = &mut self.filters[bank];
            let (wt, gw) = (filt.value.data(), filt.grad.data_mut());
            let gb = self.biases[bank].grad.data_mut();
            for m in 0..maps {
                for t in 0..steps {
                    let gv = g.data()[m * steps + t];
                    gb[m] += gv;
                    if gv == 0.0 {
                        continue;
                    }
                    axpy(gv, &x.data()[t * d..t * d + span], &mut gw[m * span..(m + 1) * span]);
                    axpy(gv, &wt[m * span..(m + 1) * span], &mut gx[t * d..t * d + span]);
                }
            }
        }
        Tensor::new(x.shape().to_vec(), gx)
    }
}

impl Parameterized for Conv1DSeqLayer {
    fn params(&self) -> Vec<&Param> {
        self.filters.iter().zip(&self.biases).flat_map(|(f, b)| [f, b]).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        self.filters
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(f, b)| [f, b])
            .collect()
    }
}
