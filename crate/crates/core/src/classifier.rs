//! The MLP deception classifier and the label decision rule.

use rand::Rng;

use crate::data::Label;
use crate::fusion::FusedVector;
use crate::nn::{relu, softmax, DenseLayer, Dropout, Mode, Param, Parameterized, Relu};
use crate::{Error, Result, Tensor};

/// Hidden width of the classifier.
pub const HIDDEN_DIM: usize = 1024;
/// Dropout keep probability after the hidden layer.
pub const KEEP_PROB: f64 = 0.5;
/// Number of classes.
pub const CLASSES: usize = 2;

/// dense(d_in → hidden) → ReLU → dropout → dense(hidden → 2).
#[derive(Debug, Clone)]
pub struct DeceptionMlp {
    pub hidden: DenseLayer,
    relu: Relu,
    dropout: Dropout,
    pub output: DenseLayer,
}

impl DeceptionMlp {
    pub fn new<R: Rng + ?Sized>(in_dim: usize, hidden: usize, keep_prob: f64, rng: &mut R) -> Result<Self> {
        if in_dim == 0 || hidden == 0 {
            return Err(Error::invalid("classifier", "dimensions must be positive"));
        }
        Ok(DeceptionMlp {
            hidden: DenseLayer::new(in_dim, hidden, rng),
            relu: Relu::new(),
            dropout: Dropout::new(keep_prob)?,
            output: DenseLayer::new(hidden, CLASSES, rng),
        })
    }

    pub fn in_dim(&self) -> usize {
        self.hidden.in_dim()
    }

    pub fn keep_prob(&self) -> f64 {
        self.dropout.keep_prob()
    }

    /// Evaluation-mode logits.
    pub fn forward(&self, z: &Tensor) -> Result<Tensor> {
        self.output.forward(&relu(&self.hidden.forward(z)?))
    }

    pub fn forward_train<R: Rng + ?Sized>(&mut self, z: &Tensor, rng: &mut R) -> Result<Tensor> {
        let h = self.hidden.forward_train(z)?;
        let h = self.relu.forward_train(&h);
        let h = self.dropout.forward_train(&h, rng);
        self.output.forward_train(&h)
    }

    /// Takes `dL/dlogits`, returns `dL/dz`.
    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        let g = self.output.backward(grad)?;
        let g = self.dropout.backward(&g)?;
        let g = self.relu.backward(&g)?;
        self.hidden.backward(&g)
    }
}

impl Parameterized for DeceptionMlp {
    fn params(&self) -> Vec<&Param> {
        let mut p = self.hidden.params();
        p.extend(self.output.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = self.hidden.params_mut();
        p.extend(self.output.params_mut());
        p
    }
}

/// Logits for `z`. Train mode applies dropout (and records the pass for
/// backpropagation); eval mode is deterministic.
pub fn classify<R: Rng + ?Sized>(
    z: &FusedVector,
    model: &mut DeceptionMlp,
    mode: Mode,
    rng: &mut R,
) -> Result<Tensor> {
    if z.len() != model.in_dim() {
        return Err(Error::invalid(
            "classify",
            format!("{} input has {} values, classifier expects {}", z.scheme, z.len(), model.in_dim()),
        ));
    }
    match mode {
        Mode::Train => model.forward_train(&z.values, rng),
        Mode::Eval => model.forward(&z.values),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: Label,
    /// Softmax probability of the deceptive class.
    pub score: f64,
}

/// Argmax label (equal logits resolve to truthful) and `P(deceptive)`.
pub fn predict(logits: &Tensor) -> Result<Prediction> {
    if logits.rank() != 1 || logits.len() != CLASSES {
        return Err(Error::invalid(
            "predict",
            format!("expected 2 logits, got shape {:?}", logits.shape()),
        ));
    }
    let p = softmax(logits)?;
    let [l0, l1] = [logits.data()[0], logits.data()[1]];
    Ok(Prediction {
        label: if l1 > l0 { Label::Deceptive } else { Label::Truthful },
        score: p.data()[1],
    })
}
