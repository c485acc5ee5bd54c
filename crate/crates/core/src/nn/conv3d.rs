use rand::Rng;

use super::{glorot_uniform, take_cache, Param, Parameterized};
use crate::tensor::{axpy, dot, expect_rank};
use crate::{Error, Result, Tensor};

/// Valid (unpadded), stride-1 3D convolution summed over input channels.
///
/// Filters have shape `(maps, channels, kd, kh, kw)`; input is
/// `(channels, frames, height, width)`; output is
/// `(maps, frames − kd + 1, height − kh + 1, width − kw + 1)`.
#[derive(Debug, Clone)]
pub struct Conv3DLayer {
    pub filters: Param,
    pub bias: Param,
    input: Option<Tensor>,
}

impl Conv3DLayer {
    pub fn new<R: Rng + ?Sized>(maps: usize, channels: usize, kernel: [usize; 3], rng: &mut R) -> Self {
        let [kd, kh, kw] = kernel;
        let vol = kd * kh * kw;
        let w = glorot_uniform(&[maps, channels, kd, kh, kw], channels * vol, maps * vol, rng);
        Conv3DLayer::from_parts(w, Tensor::zeros(&[maps])).expect("consistent shapes")
    }

    pub fn from_parts(filters: Tensor, bias: Tensor) -> Result<Self> {
        expect_rank("conv3d", &filters, 5)?;
        expect_rank("conv3d", &bias, 1)?;
        if filters.shape()[0] != bias.len() {
            return Err(Error::ShapeMismatch {
                op: "conv3d",
                left: filters.shape().to_vec(),
                right: bias.shape().to_vec(),
            });
        }
        Ok(Conv3DLayer {
            filters: Param::new(filters),
            bias: Param::new(bias),
            input: None,
        })
    }

    pub fn maps(&self) -> usize {
        self.filters.shape()[0]
    }

    pub fn channels(&self) -> usize {
        self.filters.shape()[1]
    }

    pub fn kernel(&self) -> [usize; 3] {
        let s = self.filters.shape();
        [s[2], s[3], s[4]]
    }

    /// Output shape for an input of shape `(c, f, h, w)`.
    pub fn output_shape(&self, input: &[usize]) -> Result<[usize; 4]> {
        if input.len() != 4 || input[0] != self.channels() {
            return Err(Error::ShapeMismatch {
                op: "conv3d_forward",
                left: self.filters.shape().to_vec(),
                right: input.to_vec(),
            });
        }
        let [kd, kh, kw] = self.kernel();
        if input[1] < kd || input[2] < kh || input[3] < kw {
            return Err(Error::invalid(
                "conv3d_forward",
                format!("filter {:?} larger than input {input:?}", self.kernel()),
            ));
        }
        Ok([self.maps(), input[1] - kd + 1, input[2] - kh + 1, input[3] - kw + 1])
    }

    pub fn forward(&self, video: &Tensor) -> Result<Tensor> {
        let [maps, od, oh, ow] = self.output_shape(video.shape())?;
        let [c, f, h, w] = [video.shape()[0], video.shape()[1], video.shape()[2], video.shape()[3]];
        let [kd, kh, kw] = self.kernel();
        let x = video.data();
        let wt = self.filters.value.data();
        let mut out = vec![0.0; maps * od * oh * ow];
        // Each output row is accumulated as `bias + Σ w·x` with the terms
        // added in (channel, dz, dy, dx) order.
        for m in 0..maps {
            let plane = &mut out[m * od * oh * ow..(m + 1) * od * oh * ow];
            plane.fill(self.bias.value.data()[m]);
            for ch in 0..c {
                for dz in 0..kd {
                    for dy in 0..kh {
                        for dx in 0..kw {
                            let wv = wt[(((m * c + ch) * kd + dz) * kh + dy) * kw + dx];
                            for z in 0..od {
                                for y in 0..oh {
                                    let src = ((ch * f + z + dz) * h + y + dy) * w + dx;
                                    let dst = (z * oh + y) * ow;
                                    axpy(wv, &x[src..src + ow], &mut plane[dst..dst + ow]);
                                }
                            }
                        }
                    }
                }
            }
        }
        Tensor::new(vec![maps, od, oh, ow], out)
    }

    pub fn forward_train(&mut self, video: &Tensor) -> Result<Tensor> {
        let y = self.forward(video)?;
        self.input = Some(video.clone());
        Ok(y)
    }

    /// Accumulates filter and bias gradients and returns `dL/dinput`.
    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let x = self.backward_params_inner(grad_out)?;
        let [c, f, h, w] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
        let [maps, od, oh, ow] = [grad_out.shape()[0], grad_out.shape()[1], grad_out.shape()[2], grad_out.shape()[3]];
        let [kd, kh, kw] = self.kernel();
        let g = grad_out.data();
        let wt = self.filters.value.data();
        let mut gx = vec![0.0; x.len()];
        for m in 0..maps {
            for ch in 0..c {
                for dz in 0..kd {
                    for dy in 0..kh {
                        for dx in 0..kw {
                            let wv = wt[(((m * c + ch) * kd + dz) * kh + dy) * kw + dx];
                            for z in 0..od {
                                for y in 0..oh {
                                    let dst = ((ch * f + z + dz) * h + y + dy) * w + dx;
                                    let src = ((m * od + z) * oh + y) * ow;
                                    axpy(wv, &g[src..src + ow], &mut gx[dst..dst + ow]);
                                }
                            }
                        }
                    }
                }
            }
        }
        Tensor::new(x.shape().to_vec(), gx)
    }

    /// Parameter gradients only; the input of a visual extractor is data.
    pub fn backward_params(&mut self, grad_out: &Tensor) -> Result<()> {
        self.backward_params_inner(grad_out).map(|_| ())
    }

    fn backward_params_inner(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let x = take_cache(&mut self.input, "conv3d")?;
        let expected = self.output_shape(x.shape())?;
        if grad_out.shape() != expected {
            return Err(Error::ShapeMismatch {
                op: "conv3d_backward",
                left: expected.to_vec(),
                right: grad_out.shape().to_vec(),
            });
        }
        let [c, f, h, w] = [x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]];
        let [maps, od, oh, ow] = expected;
        let [kd, kh, kw] = self.kernel();
        let g = grad_out.data();
        let xd = x.data();
        let gw = self.filters.grad.data_mut();
        let gb = self.bias.grad.data_mut();
        for m in 0..maps {
            let plane = &g[m * od * oh * ow..(m + 1) * od * oh * ow];
            gb[m] += plane.iter().sum::<f64>();
            for ch in 0..c {
                for dz in 0..kd {
                    for dy in 0..kh {
                        for dx in 0..kw {
                            let mut acc = 0.0;
                            for z in 0..od {
                                for y in 0..oh {
                                    let src = ((ch * f + z + dz) * h + y + dy) * w + dx;
                                    let row = (z * oh + y) * ow;
                                    acc += dot(&plane[row..row + ow], &xd[src..src + ow]);
                                }
                            }
                            gw[(((m * c + ch) * kd + dz) * kh + dy) * kw + dx] += acc;
                        }
                    }
                }
            }
        }
        Ok(x)
    }
}

impl Parameterized for Conv3DLayer {
    fn params(&self) -> Vec<&Param> {
        vec![&self.filters, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![&mut self.filters, &mut self.bias]
    }
}
