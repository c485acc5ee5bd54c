use crate::{Error, Result, Tensor};

/// Lower bound applied to every per-feature standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-feature mean and (population) standard deviation of a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardizationStats {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl StandardizationStats {
    pub fn fit(vectors: &[&Tensor]) -> Result<Self> {
        let first = vectors
            .first()
            .ok_or_else(|| Error::invalid("standardize", "no training vectors"))?;
        let dim = first.len();
        if let Some(bad) = vectors.iter().find(|v| v.len() != dim || v.rank() != 1) {
            return Err(Error::ShapeMismatch {
                op: "standardize",
                left: first.shape().to_vec(),
                right: bad.shape().to_vec(),
            });
        }
        let n = vectors.len() as f64;
        let mut mean = vec![0.0; dim];
        for v in vectors {
            for (m, x) in mean.iter_mut().zip(v.data()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for v in vectors {
            for ((s, x), m) in var.iter_mut().zip(v.data()).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Ok(StandardizationStats { mean, std })
    }

    pub fn from_parts(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() || mean.is_empty() {
            return Err(Error::invalid("standardize", "mean and std lengths differ"));
        }
        let std = std.into_iter().map(|s| s.max(STD_FLOOR)).collect();
        Ok(StandardizationStats { mean, std })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn apply(&self, x: &Tensor) -> Result<Tensor> {
        if x.rank() != 1 || x.len() != self.mean.len() {
            return Err(Error::ShapeMismatch {
                op: "standardize",
                left: vec![self.mean.len()],
                right: x.shape().to_vec(),
            });
        }
        let data = x
            .data()
            .iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect();
        Tensor::vector(data)
    }
}

/// `(x − mean) / std` per feature, using statistics from the training split.
pub fn zstandardize(vectors: &[&Tensor], stats: &StandardizationStats) -> Result<Vec<Tensor>> {
    vectors.iter().map(|v| stats.apply(v)).collect()
}
