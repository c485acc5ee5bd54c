//! Non-overlapping max pooling (stride = window, trailing remainder dropped).

use super::take_cache;
use crate::tensor::expect_rank;
use crate::{Error, Result, Tensor};

/// Pools `(maps, f, h, w)` to `(maps, f/p, h/p, w/p)`; returns the output
/// and the flat input index of each maximum (first one on ties).
fn pool3d_with_argmax(x: &Tensor, window: usize) -> Result<(Tensor, Vec<usize>)> {
    expect_rank("maxpool3d", x, 4)?;
    let s = x.shape();
    let [maps, f, h, w] = [s[0], s[1], s[2], s[3]];
    if window == 0 || window > f || window > h || window > w {
        return Err(Error::invalid(
            "maxpool3d",
            format!("window {window} does not fit spatial extents {:?}", &s[1..]),
        ));
    }
    let (pf, ph, pw) = (f / window, h / window, w / window);
    let data = x.data();
    let mut out = Vec::with_capacity(maps * pf * ph * pw);
    let mut argmax = Vec::with_capacity(out.capacity());
    for m in 0..maps {
        for z in 0..pf {
            for y in 0..ph {
                for xo in 0..pw {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0;
                    for dz in 0..window {
                        for dy in 0..window {
                            for dx in 0..window {
                                let idx = ((m * f + z * window + dz) * h + y * window + dy) * w
                                    + xo * window
                                    + dx;
                                if data[idx] > best {
                                    best = data[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                    }
                    out.push(best);
                    argmax.push(best_idx);
                }
            }
        }
    }
    Ok((Tensor::new(vec![maps, pf, ph, pw], out)?, argmax))
}

fn pool1d_with_argmax(x: &Tensor, window: usize) -> Result<(Tensor, Vec<usize>)> {
    expect_rank("maxpool1d", x, 1)?;
    if window == 0 || x.len() < window {
        return Err(Error::invalid(
            "maxpool1d",
            format!("input length {} shorter than window {window}", x.len()),
        ));
    }
    let mut out = Vec::with_capacity(x.len() / window);
    let mut argmax = Vec::with_capacity(out.capacity());
    for (b, block) in x.data().chunks_exact(window).enumerate() {
        let mut best_idx = 0;
        for (i, &v) in block.iter().enumerate() {
            if v > block[best_idx] {
                best_idx = i;
            }
        }
        out.push(block[best_idx]);
        argmax.push(b * window + best_idx);
    }
    Ok((Tensor::vector(out)?, argmax))
}

fn scatter(grad_out: &Tensor, argmax: &[usize], input_shape: &[usize], op: &'static str) -> Result<Tensor> {
    if grad_out.len() != argmax.len() {
        return Err(Error::ShapeMismatch {
            op,
            left: vec![argmax.len()],
            right: grad_out.shape().to_vec(),
        });
    }
    let mut g = Tensor::zeros(input_shape);
    let gd = g.data_mut();
    for (&i, &v) in argmax.iter().zip(grad_out.data()) {
        gd[i] += v;
    }
    Ok(g)
}

pub fn maxpool3d(x: &Tensor, window: usize) -> Result<Tensor> {
    pool3d_with_argmax(x, window).map(|(t, _)| t)
}

pub fn maxpool1d(x: &Tensor, window: usize) -> Result<Tensor> {
    pool1d_with_argmax(x, window).map(|(t, _)| t)
}

#[derive(Debug, Clone)]
pub struct MaxPool3d {
    window: usize,
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool3d {
    pub fn new(window: usize) -> Self {
        MaxPool3d { window, cache: None }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        maxpool3d(x, self.window)
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        let (y, argmax) = pool3d_with_argmax(x, self.window)?;
        self.cache = Some((x.shape().to_vec(), argmax));
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let (shape, argmax) = take_cache(&mut self.cache, "maxpool3d")?;
        scatter(grad_out, &argmax, &shape, "maxpool3d_backward")
    }
}

#[derive(Debug, Clone)]
pub struct MaxPool1d {
    window: usize,
    cache: Option<(usize, Vec<usize>)>,
}

impl MaxPool1d {
    pub fn new(window: usize) -> Self {
        MaxPool1d { window, cache: None }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        maxpool1d(x, self.window)
    }

    pub fn forward_train(&mut self, x: &Tensor) -> Result<Tensor> {
        let (y, argmax) = pool1d_with_argmax(x, self.window)?;
        self.cache = Some((x.len(), argmax));
        Ok(y)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let (len, argmax) = take_cache(&mut self.cache, "maxpool1d")?;
        scatter(grad_out, &argmax, &[len], "maxpool1d_backward")
    }
}
