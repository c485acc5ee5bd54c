use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gradcheck::{central_difference, check_parameters, relative_error, FD_STEP, FD_TOLERANCE};
use crate::nn::Parameterized;
use crate::{Result, Tensor};

pub fn random_tensor<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn weighted_sum(y: &Tensor, c: &Tensor) -> f64 {
    y.data().iter().zip(c.data()).map(|(a, b)| a * b).sum()
}

/// Finite-difference check of a layer under the scalar loss `Σ c·y` with
/// random `c`: every parameter entry and every input entry.
pub fn check_layer_gradients<L: Parameterized>(
    mut layer: L,
    x: Tensor,
    forward: impl Fn(&L, &Tensor) -> Result<Tensor>,
    forward_train: impl Fn(&mut L, &Tensor) -> Result<Tensor>,
    backward: impl Fn(&mut L, &Tensor) -> Result<Tensor>,
    seed: u64,
) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    layer.zero_grad();
    let y = forward_train(&mut layer, &x).unwrap();
    let c = random_tensor(y.shape(), &mut rng);
    let grad_x = backward(&mut layer, &c).unwrap();
    let analytic: Vec<Tensor> = layer.params().iter().map(|p| p.grad.clone()).collect();
    let names: Vec<String> = (0..analytic.len()).map(|i| format!("param{i}")).collect();

    let loss = |l: &L| weighted_sum(&forward(l, &x).unwrap(), &c);
    for check in check_parameters(&mut layer, &names, &analytic, &loss, None, &mut rng) {
        assert!(check.rel_error < FD_TOLERANCE, "seed {seed}: {check:?}");
    }

    let mut xs = x.clone();
    let numeric: Vec<f64> = (0..xs.len())
        .map(|j| {
            central_difference(
                &mut xs,
                &|t: &mut Tensor| &mut t.data_mut()[j],
                &|t: &Tensor| weighted_sum(&forward(&layer, t).unwrap(), &c),
                FD_STEP,
            )
        })
        .collect();
    let err = relative_error(grad_x.data(), &numeric);
    assert!(err < FD_TOLERANCE, "seed {seed}: input gradient rel err {err}");
}
