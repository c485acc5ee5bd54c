//! Central finite-difference checking of analytic gradients.
//!
//! The error measure is the norm-wise relative error
//! `‖a − n‖₂ / (‖a‖₂ + ‖n‖₂)` over the checked coordinates of one tensor,
//! which stays meaningful when individual gradient entries are near zero.

use rand::seq::index::sample;
use rand::Rng;

use crate::nn::Parameterized;
use crate::Tensor;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Largest accepted relative error between analytic and numeric gradients.
pub const FD_TOLERANCE: f64 = 1e-4;

/// Outcome of checking one tensor.
#[derive(Debug, Clone)]
pub struct GradCheck {
    pub name: String,
    pub checked: usize,
    pub rel_error: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.rel_error < FD_TOLERANCE
    }
}

pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()) + norm(&mut numeric.iter().copied());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// `(L(θ + h) − L(θ − h)) / 2h` for the coordinate selected by `coord`,
/// restoring the original value afterwards.
pub fn central_difference<M: ?Sized>(
    target: &mut M,
    coord: &dyn Fn(&mut M) -> &mut f64,
    loss: &dyn Fn(&M) -> f64,
    step: f64,
) -> f64 {
    let orig = *coord(target);
    *coord(target) = orig + step;
    let plus = loss(target);
    *coord(target) = orig - step;
    let minus = loss(target);
    *coord(target) = orig;
    (plus - minus) / (2.0 * step)
}

/// Coordinates to probe in a tensor of `len` entries: all of them when
/// `limit` is `None` or at least `len`, otherwise a random subset.
pub fn probe_indices<R: Rng + ?Sized>(len: usize, limit: Option<usize>, rng: &mut R) -> Vec<usize> {
    match limit {
        Some(k) if k < len => {
            let mut idx = sample(rng, len, k).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..len).collect(),
    }
}

/// Checks every non-frozen parameter of `model` against `analytic`, the
/// gradients previously accumulated by its backward pass (one tensor per
/// parameter, in `params()` order). `names` labels the parameters.
pub fn check_parameters<M: Parameterized, R: Rng + ?Sized>(
    model: &mut M,
    names: &[String],
    analytic: &[Tensor],
    loss: &dyn Fn(&M) -> f64,
    limit: Option<usize>,
    rng: &mut R,
) -> Vec<GradCheck> {
    let frozen: Vec<bool> = model.params().iter().map(|p| p.frozen).collect();
    let mut out = Vec::new();
    for (pi, grad) in analytic.iter().enumerate() {
        if frozen[pi] {
            continue;
        }
        let idx = probe_indices(grad.len(), limit, rng);
        let mut a = Vec::with_capacity(idx.len());
        let mut n = Vec::with_capacity(idx.len());
        for &j in &idx {
            a.push(grad.data()[j]);
            n.push(central_difference(
                model,
                &|m: &mut M| param_coord(m, pi, j),
                loss,
                FD_STEP,
            ));
        }
        out.push(GradCheck {
            name: names.get(pi).cloned().unwrap_or_else(|| format!("param{pi}")),
            checked: idx.len(),
            rel_error: relative_error(&a, &n),
        });
    }
    out
}

fn param_coord<M: Parameterized>(m: &mut M, param: usize, index: usize) -> &mut f64 {
    &mut m.params_mut().swap_remove(param).value.data_mut()[index]
}
