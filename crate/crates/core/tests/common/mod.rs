//! Shared oracles and gradient checks for the integration tests and the
//! acceptance suite.
#![allow(dead_code)]

use mmdd_core::data::{generate_synthetic, PAD_ID, Sample, SignalStrength, SyntheticSpec};
use mmdd_core::extractors::{TextConfig, TextMode, VisualConfig};
use mmdd_core::fusion::FusionScheme;
use mmdd_core::gradcheck::{central_difference, check_parameters, relative_error, GradCheck, FD_STEP};
use mmdd_core::model::{DeceptionModel, ModelConfig, PreparedSample, Preprocessing};
use mmdd_core::nn::{Conv1DSeqLayer, Conv3DLayer, DenseLayer, Dropout, MaxPool1d, MaxPool3d, Parameterized, Relu};
use mmdd_core::training::{cross_entropy, cross_entropy_grad, one_hot};
use mmdd_core::nn::softmax;
use mmdd_core::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_tensor<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn weighted(y: &Tensor, c: &Tensor) -> f64 {
    y.data().iter().zip(c.data()).map(|(a, b)| a * b).sum()
}

/// Finite-difference check of `dL/dx` for a scalar loss of `x`.
pub fn input_check(name: &str, x: &Tensor, analytic: &Tensor, loss: &dyn Fn(&Tensor) -> f64) -> GradCheck {
    let mut xs = x.clone();
    let numeric: Vec<f64> = (0..xs.len())
        .map(|j| central_difference(&mut xs, &|t: &mut Tensor| &mut t.data_mut()[j], loss, FD_STEP))
        .collect();
    GradCheck {
        name: name.to_string(),
        checked: numeric.len(),
        rel_error: relative_error(analytic.data(), &numeric),
    }
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}.param{i}")).collect()
}

/// Checks every layer type once under the loss `Σ c·y` for random `c`.
pub fn layer_checks(seed: u64) -> Vec<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();

    // Dense.
    let mut dense = DenseLayer::new(7, 5, &mut rng);
    let x = random_tensor(&[7], &mut rng);
    let c = random_tensor(&[5], &mut rng);
    dense.forward_train(&x).unwrap();
    let gx = dense.backward(&c).unwrap();
    let analytic: Vec<Tensor> = dense.params().iter().map(|p| p.grad.clone()).collect();
    out.extend(check_parameters(&mut dense, &names("dense", 2), &analytic, &|l: &DenseLayer| weighted(&l.forward(&x).unwrap(), &c), None, &mut rng));
    out.push(input_check("dense.input", &x, &gx, &|t| weighted(&dense.forward(t).unwrap(), &c)));

    // Conv3d.
    let mut conv = Conv3DLayer::new(2, 2, [2, 2, 2], &mut rng);
    let x = random_tensor(&[2, 3, 4, 4], &mut rng);
    let y = conv.forward_train(&x).unwrap();
    let c = random_tensor(y.shape(), &mut rng);
    let gx = conv.backward(&c).unwrap();
    let analytic: Vec<Tensor> = conv.params().iter().map(|p| p.grad.clone()).collect();
    out.extend(check_parameters(&mut conv, &names("conv3d", 2), &analytic, &|l: &Conv3DLayer| weighted(&l.forward(&x).unwrap(), &c), None, &mut rng));
    out.push(input_check("conv3d.input", &x, &gx, &|t| weighted(&conv.forward(t).unwrap(), &c)));

    // Conv1d over a token matrix.
    let mut conv1 = Conv1DSeqLayer::new(&[2, 3], 3, 4, &mut rng);
    let x = random_tensor(&[7, 4], &mut rng);
    let ys = conv1.forward_train(&x).unwrap();
    let cs: Vec<Tensor> = ys.iter().map(|y| random_tensor(y.shape(), &mut rng)).collect();
    let gx = conv1.backward(&cs).unwrap();
    let analytic: Vec<Tensor> = conv1.params().iter().map(|p| p.grad.clone()).collect();
    let loss1 = |l: &Conv1DSeqLayer, t: &Tensor| -> f64 {
        l.forward(t).unwrap().iter().zip(&cs).map(|(y, c)| weighted(y, c)).sum()
    };
    out.extend(check_parameters(&mut conv1, &names("conv1d", 4), &analytic, &|l: &Conv1DSeqLayer| loss1(l, &x), None, &mut rng));
    out.push(input_check("conv1d.input", &x, &gx, &|t| loss1(&conv1, t)));

    // Max pooling (inputs drawn continuous, so ties have probability zero).
    let mut pool3 = MaxPool3d::new(2);
    let x = random_tensor(&[2, 4, 5, 4], &mut rng);
    let y = pool3.forward_train(&x).unwrap();
    let c = random_tensor(y.shape(), &mut rng);
    let gx = pool3.backward(&c).unwrap();
    out.push(input_check("maxpool3d.input", &x, &gx, &|t| weighted(&pool3.forward(t).unwrap(), &c)));

    let mut pool1 = MaxPool1d::new(3);
    let x = random_tensor(&[11], &mut rng);
    let y = pool1.forward_train(&x).unwrap();
    let c = random_tensor(y.shape(), &mut rng);
    let gx = pool1.backward(&c).unwrap();
    out.push(input_check("maxpool1d.input", &x, &gx, &|t| weighted(&pool1.forward(t).unwrap(), &c)));

    // ReLU.
    let mut relu = Relu::new();
    let x = random_tensor(&[9], &mut rng);
    let y = relu.forward_train(&x);
    let c = random_tensor(y.shape(), &mut rng);
    let gx = relu.backward(&c).unwrap();
    out.push(input_check("relu.input", &x, &gx, &|t| weighted(&mmdd_core::nn::relu(t), &c)));

    // Dropout with a fixed mask: reseeding reproduces the same mask.
    let mask_seed = rng.random::<u64>();
    let mut dropout = Dropout::new(0.5).unwrap();
    let x = random_tensor(&[12], &mut rng);
    let c = random_tensor(&[12], &mut rng);
    dropout.forward_train(&x, &mut ChaCha8Rng::seed_from_u64(mask_seed));
    let gx = dropout.backward(&c).unwrap();
    out.push(input_check("dropout.input", &x, &gx, &|t| {
        let mut d = Dropout::new(0.5).unwrap();
        weighted(&d.forward_train(t, &mut ChaCha8Rng::seed_from_u64(mask_seed)), &c)
    }));
    out
}

/// A miniature architecture: real feature widths (300, 6373-input audio
/// reducer, 39 micro-expressions) with tiny extractors.
pub fn miniature_config(fusion: FusionScheme, text_mode: TextMode) -> ModelConfig {
    ModelConfig {
        fusion,
        text_mode,
        visual: VisualConfig {
            input_shape: [3, 4, 6, 6],
            maps: 2,
            kernel: [2, 2, 2],
            pool: 2,
        },
        text: TextConfig {
            max_tokens: 8,
            widths: vec![2, 3],
            maps: 2,
            pool: 2,
        },
        embedding_dim: 4,
        hidden: 8,
        keep_prob: 1.0,
    }
}

pub fn miniature_samples(seed: u64) -> Vec<Sample> {
    let spec = SyntheticSpec {
        samples: 4,
        subjects: 2,
        strength: SignalStrength::uniform(1.0),
        seed,
        video_shape: [3, 4, 6, 6],
        embedding_dim: 4,
        vocab_size: 10,
        transcript_words: 6,
        ..SyntheticSpec::default()
    };
    generate_synthetic(&spec).unwrap().dataset.samples
}

/// End-to-end check of every model parameter under the mean base-2
/// cross-entropy of two samples. Large tensors are probed on `limit`
/// random coordinates.
pub fn model_checks(seed: u64, fusion: FusionScheme, text_mode: TextMode, limit: usize) -> Vec<GradCheck> {
    let samples = miniature_samples(seed);
    let refs: Vec<&Sample> = samples.iter().collect();
    let config = miniature_config(fusion, text_mode);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prep = Preprocessing::fit(&config, &refs, None, &mut rng).unwrap();
    let mut model = DeceptionModel::new(config, prep, &mut rng).unwrap();
    // Perturb the zero-initialised biases so every term is exercised.
    for p in model.params_mut() {
        if p.value.rank() == 1 {
            for v in p.value.data_mut() {
                *v = rng.random_range(-0.1..0.1);
            }
        }
    }
    let batch: Vec<PreparedSample> = refs[..2].iter().map(|s| model.prepare(s).unwrap()).collect();

    model.zero_grad();
    for x in &batch {
        let logits = model.forward_train(x, &mut rng).unwrap();
        let p = softmax(&logits).unwrap();
        model.backward(&cross_entropy_grad(&p, x.label, batch.len()).unwrap()).unwrap();
    }
    let analytic: Vec<Tensor> = model.params().iter().map(|p| p.grad.clone()).collect();
    let loss = |m: &DeceptionModel| -> f64 {
        batch
            .iter()
            .map(|x| cross_entropy(&one_hot(x.label), softmax(&m.forward(x).unwrap()).unwrap().data()).unwrap())
            .sum::<f64>()
            / batch.len() as f64
    };
    let names = model.param_names();
    let mut checks = check_parameters(&mut model, &names, &analytic, &loss, Some(limit), &mut rng);
    // The padding row is a constant zero vector, so the embedding table is
    // checked on every other coordinate instead.
    if let Some(pi) = names.iter().position(|n| n == "text.embedding") {
        if !model.params()[pi].frozen {
            let width = analytic[pi].shape()[1];
            let coords: Vec<usize> = (PAD_ID * width + width..analytic[pi].len()).collect();
            let numeric: Vec<f64> = coords
                .iter()
                .map(|&j| {
                    central_difference(
                        &mut model,
                        &|m: &mut DeceptionModel| &mut m.params_mut().into_iter().nth(pi).unwrap().value.data_mut()[j],
                        &loss,
                        FD_STEP,
                    )
                })
                .collect();
            let a: Vec<f64> = coords.iter().map(|&j| analytic[pi].data()[j]).collect();
            let entry = checks.iter_mut().find(|c| c.name == "text.embedding").expect("embedding is checked");
            *entry = GradCheck {
                name: "text.embedding".into(),
                checked: coords.len(),
                rel_error: relative_error(&a, &numeric),
            };
        }
    }
    checks
}

/// Nested-loop 3D convolution oracle.
pub fn conv3d_oracle(filters: &Tensor, bias: &Tensor, x: &Tensor) -> Tensor {
    let f = filters.shape();
    let (m, c, kd, kh, kw) = (f[0], f[1], f[2], f[3], f[4]);
    let s = x.shape();
    let (fr, h, w) = (s[1], s[2], s[3]);
    let (od, oh, ow) = (fr - kd + 1, h - kh + 1, w - kw + 1);
    let fi = |a: usize, b: usize, z: usize, y: usize, xx: usize| filters.data()[(((a * c + b) * kd + z) * kh + y) * kw + xx];
    let xi = |b: usize, z: usize, y: usize, xx: usize| x.data()[((b * fr + z) * h + y) * w + xx];
    let mut out = Vec::with_capacity(m * od * oh * ow);
    for a in 0..m {
        for z in 0..od {
            for y in 0..oh {
                for xx in 0..ow {
                    let mut acc = bias.data()[a];
                    for b in 0..c {
                        for dz in 0..kd {
                            for dy in 0..kh {
                                for dx in 0..kw {
                                    acc += fi(a, b, dz, dy, dx) * xi(b, z + dz, y + dy, xx + dx);
                                }
                            }
                        }
                    }
                    out.push(acc);
                }
            }
        }
    }
    Tensor::new(vec![m, od, oh, ow], out).unwrap()
}

/// Nested-loop sentence convolution oracle for one filter bank.
pub fn conv1d_oracle(filters: &Tensor, bias: &Tensor, tokens: &Tensor) -> Tensor {
    let (m, w, d) = (filters.shape()[0], filters.shape()[1], filters.shape()[2]);
    let l = tokens.shape()[0];
    let steps = l - w + 1;
    let mut out = Vec::with_capacity(m * steps);
    for a in 0..m {
        for i in 0..steps {
            let mut acc = bias.data()[a];
            for k in 0..w {
                for j in 0..d {
                    acc += filters.data()[(a * w + k) * d + j] * tokens.data()[(i + k) * d + j];
                }
            }
            out.push(acc);
        }
    }
    Tensor::new(vec![m, steps], out).unwrap()
}

/// Norm-wise relative difference `‖a − b‖ / ‖b‖` (0 when both are zero).
pub fn rel_diff(a: &Tensor, b: &Tensor) -> f64 {
    assert_eq!(a.shape(), b.shape());
    let diff: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let norm: f64 = b.data().iter().map(|y| y * y).sum::<f64>().sqrt();
    if norm == 0.0 {
        diff
    } else {
        diff / norm
    }
}

/// Largest oracle discrepancy over `instances` random conv3d problems.
pub fn conv3d_oracle_worst(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let (m, c) = (rng.random_range(1..4), rng.random_range(1..4));
        let k = [rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..4)];
        let shape = [c, k[0] + rng.random_range(0..4), k[1] + rng.random_range(0..5), k[2] + rng.random_range(0..5)];
        let filters = random_tensor(&[m, c, k[0], k[1], k[2]], &mut rng);
        let bias = random_tensor(&[m], &mut rng);
        let x = random_tensor(&shape, &mut rng);
        let layer = Conv3DLayer::from_parts(filters.clone(), bias.clone()).unwrap();
        worst = worst.max(rel_diff(&layer.forward(&x).unwrap(), &conv3d_oracle(&filters, &bias, &x)));
    }
    worst
}

/// Largest oracle discrepancy over `instances` random conv1d problems.
pub fn conv1d_oracle_worst(instances: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let banks = rng.random_range(1..4);
        let (maps, depth) = (rng.random_range(1..5), rng.random_range(1..7));
        let widths: Vec<usize> = (0..banks).map(|_| rng.random_range(1..6)).collect();
        let len = widths.iter().max().unwrap() + rng.random_range(0..8);
        let filters: Vec<Tensor> = widths.iter().map(|&w| random_tensor(&[maps, w, depth], &mut rng)).collect();
        let biases: Vec<Tensor> = widths.iter().map(|_| random_tensor(&[maps], &mut rng)).collect();
        let tokens = random_tensor(&[len, depth], &mut rng);
        let layer = Conv1DSeqLayer::from_parts(filters.clone(), biases.clone()).unwrap();
        for ((y, f), b) in layer.forward(&tokens).unwrap().iter().zip(&filters).zip(&biases) {
            worst = worst.max(rel_diff(y, &conv1d_oracle(f, b, &tokens)));
        }
    }
    worst
}

/// Exhaustive pairwise AUC: wins plus half the ties over all
/// (deceptive, truthful) pairs.
pub fn pairwise_auc(scores: &[f64], deceptive: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &pi) in deceptive.iter().enumerate() {
        for (j, &pj) in deceptive.iter().enumerate() {
            if pi && !pj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}
