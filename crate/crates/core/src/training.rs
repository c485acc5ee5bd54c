//! Base-2 cross-entropy, plain SGD and the epoch loop.

use std::f64::consts::LN_2;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::predict;
use crate::data::{EmbeddingTable, Label, Sample};
use crate::model::{DeceptionModel, ModelConfig, PreparedSample, Preprocessing};
use crate::nn::{softmax, Parameterized};
use crate::tensor::check_same_shape;
use crate::{Error, Result, Tensor};

/// Probabilities are clamped to at least this before taking the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

pub fn one_hot(label: Label) -> [f64; 2] {
    match label {
        Label::Truthful => [1.0, 0.0],
        Label::Deceptive => [0.0, 1.0],
    }
}

/// `−Σ y_j · log₂(max(ŷ_j, 1e-12))` for a one-hot `y`.
pub fn cross_entropy(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(Error::ShapeMismatch {
            op: "cross_entropy",
            left: vec![y.len()],
            right: vec![y_hat.len()],
        });
    }
    let ones = y.iter().filter(|&&v| v == 1.0).count();
    if ones != 1 || y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("cross_entropy", format!("target {y:?} is not one-hot")));
    }
    let total: f64 = y_hat.iter().sum();
    if (total - 1.0).abs() > 1e-9 || y_hat.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid(
            "cross_entropy",
            format!("prediction {y_hat:?} is not a probability vector"),
        ));
    }
    let log_likelihood: f64 = y
        .iter()
        .zip(y_hat)
        .filter(|(&t, _)| t == 1.0)
        .map(|(_, &p)| p.max(PROB_FLOOR).log2())
        .sum();
    // Subtracting from +0 keeps a perfect prediction at 0 rather than -0.
    Ok(0.0 - log_likelihood)
}

/// Mean cross-entropy over `(label, probabilities)` pairs.
pub fn batch_loss(batch: &[(Label, Tensor)]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("batch_loss", "empty batch"));
    }
    let mut total = 0.0;
    for (label, p) in batch {
        total += cross_entropy(&one_hot(*label), p.data())?;
    }
    Ok(total / batch.len() as f64)
}

/// Gradient of the mean base-2 cross-entropy with respect to the logits of
/// one sample in a batch of `n`: `(p − y) / (n · ln 2)`.
pub fn cross_entropy_grad(probs: &Tensor, label: Label, n: usize) -> Result<Tensor> {
    let y = one_hot(label);
    let scale = 1.0 / (n as f64 * LN_2);
    Tensor::vector(probs.data().iter().zip(y).map(|(p, t)| (p - t) * scale).collect())
}

/// `θ ← θ − lr · g`.
pub fn sgd_step(param: &mut Tensor, grad: &Tensor, lr: f64) -> Result<()> {
    check_same_shape("sgd_step", param, grad)?;
    for (w, g) in param.data_mut().iter_mut().zip(grad.data()) {
        *w -= lr * g;
    }
    Ok(())
}

/// One SGD step on every unfrozen parameter using its accumulated gradient.
pub fn sgd_update<M: Parameterized + ?Sized>(model: &mut M, lr: f64) -> Result<()> {
    for p in model.params_mut() {
        if !p.frozen {
            sgd_step(&mut p.value, &p.grad, lr)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Stop once the epoch loss has not improved for this many epochs.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 200,
            batch_size: 8,
            seed: 42,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::invalid(
                "train config",
                format!("learning_rate must be finite and non-negative, got {}", self.learning_rate),
            ));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.patience == Some(0) {
            return Err(Error::invalid("train config", "epochs, batch_size and patience must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean cross-entropy (bits) over the epoch's training samples.
    pub loss: f64,
    /// Training accuracy of the dropout-perturbed forward passes.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub stopped_early: bool,
}

impl TrainHistory {
    /// One JSON object per epoch.
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("epoch stats serialise") + "\n")
            .collect()
    }

    /// First (1-based) epoch whose training accuracy reached `threshold`.
    pub fn first_epoch_at_accuracy(&self, threshold: f64) -> Option<usize> {
        self.epochs.iter().find(|e| e.accuracy >= threshold).map(|e| e.epoch)
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }
}

/// Trains `model` in place on already prepared samples.
pub fn fit<R: Rng + ?Sized>(
    model: &mut DeceptionModel,
    data: &[PreparedSample],
    config: &TrainConfig,
    rng: &mut R,
) -> Result<TrainHistory> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for epoch in 1..=config.epochs {
        order.shuffle(rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            model.zero_grad();
            for &i in chunk {
                let x = &data[i];
                let logits = model.forward_train(x, rng)?;
                let probs = softmax(&logits)?;
                let loss = if probs.is_finite() {
                    cross_entropy(&one_hot(x.label), probs.data())?
                } else {
                    f64::NAN
                };
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, batch: batch + 1 });
                }
                loss_sum += loss;
                correct += usize::from(predict(&logits)?.label == x.label);
                model.backward(&cross_entropy_grad(&probs, x.label, chunk.len())?)?;
            }
            sgd_update(model, config.learning_rate)?;
        }
        let loss = loss_sum / data.len() as f64;
        history.epochs.push(EpochStats {
            epoch,
            loss,
            accuracy: correct as f64 / data.len() as f64,
        });
        log::debug!("epoch {epoch}: loss {loss:.6}");
        if let Some(patience) = config.patience {
            if loss < best {
                best = loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    history.stopped_early = true;
                    break;
                }
            }
        }
    }
    Ok(history)
}

/// Fits preprocessing on `train`, initialises a model and trains it. Every
/// random draw (embedding init, weights, shuffling, dropout) comes from one
/// generator seeded with `config.seed`.
pub fn train(
    train: &[&Sample],
    pretrained: Option<&EmbeddingTable>,
    model_config: &ModelConfig,
    config: &TrainConfig,
) -> Result<(DeceptionModel, TrainHistory)> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let prep = Preprocessing::fit(model_config, train, pretrained, &mut rng)?;
    let mut model = DeceptionModel::new(model_config.clone(), prep, &mut rng)?;
    let data = train.iter().map(|s| model.prepare(s)).collect::<Result<Vec<_>>>()?;
    let history = fit(&mut model, &data, config, &mut rng)?;
    Ok((model, history))
}
