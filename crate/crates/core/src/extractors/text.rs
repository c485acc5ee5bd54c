use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::FEATURE_DIM;
use crate::data::{EmbeddingTable, PAD_ID};
use crate::nn::{relu, Conv1DSeqLayer, DenseLayer, MaxPool1d, Param, Parameterized, Relu};
use crate::tensor::axpy;
use crate::{Error, Result, Tensor};

/// Whether word vectors are frozen (`Static`) or fine-tuned (`NonStatic`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TextMode {
    Static,
    NonStatic,
}

impl fmt::Display for TextMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TextMode::Static => "static",
            TextMode::NonStatic => "non-static",
        })
    }
}

impl FromStr for TextMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "static" => Ok(TextMode::Static),
            "non-static" | "nonstatic" | "non_static" => Ok(TextMode::NonStatic),
            _ => Err(Error::invalid(
                "text mode",
                format!("`{s}` is not one of static, non-static"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextConfig {
    /// Every transcript is padded or truncated to this many tokens.
    pub max_tokens: usize,
    pub widths: Vec<usize>,
    /// Feature maps per filter width.
    pub maps: usize,
    pub pool: usize,
}

impl TextConfig {
    pub fn full() -> Self {
        TextConfig {
            max_tokens: 128,
            widths: vec![3, 5, 8],
            maps: 20,
            pool: 2,
        }
    }

    /// Length of the concatenated pooled maps fed to the dense layer.
    pub fn pooled_len(&self) -> Result<usize> {
        if self.widths.is_empty() || self.maps == 0 || self.pool == 0 {
            return Err(Error::invalid("text extractor", "needs widths, maps and a pool window"));
        }
        let mut total = 0;
        for &w in &self.widths {
            if w == 0 || self.max_tokens < w || self.max_tokens - w + 1 < self.pool {
                return Err(Error::invalid(
                    "text extractor",
                    format!("{} tokens too short for width {w} and pool {}", self.max_tokens, self.pool),
                ));
            }
            total += self.maps * ((self.max_tokens - w + 1) / self.pool);
        }
        Ok(total)
    }
}

/// embed → conv per width → max-pool each map → concat → dense(300) → ReLU.
///
/// Pooled maps are concatenated by ascending width order as configured, then
/// by map index.
#[derive(Debug, Clone)]
pub struct TextExtractor {
    config: TextConfig,
    mode: TextMode,
    vocabulary: Vec<String>,
    pub embedding: Param,
    pub conv: Conv1DSeqLayer,
    pools: Vec<MaxPool1d>,
    pub dense: DenseLayer,
    relu: Relu,
    tokens: Option<Vec<usize>>,
}

impl TextExtractor {
    pub fn new<R: Rng + ?Sized>(
        config: TextConfig,
        embeddings: &EmbeddingTable,
        mode: TextMode,
        rng: &mut R,
    ) -> Result<Self> {
        let mut widths = config.widths.clone();
        widths.sort_unstable();
        let config = TextConfig { widths, ..config };
        let flat = config.pooled_len()?;
        let conv = Conv1DSeqLayer::new(&config.widths, config.maps, embeddings.dim(), rng);
        let dense = DenseLayer::new(flat, FEATURE_DIM, rng);
        let mut embedding = Param::new(embeddings.vectors().clone());
        embedding.frozen = mode == TextMode::Static;
        let pools = (0..config.widths.len() * config.maps)
            .map(|_| MaxPool1d::new(config.pool))
            .collect();
        Ok(TextExtractor {
            config,
            mode,
            vocabulary: embeddings.tokens().to_vec(),
            embedding,
            conv,
            pools,
            dense,
            relu: Relu::new(),
            tokens: None,
        })
    }

    pub fn config(&self) -> &TextConfig {
        &self.config
    }

    pub fn mode(&self) -> TextMode {
        self.mode
    }

    /// The current (possibly fine-tuned) embedding table.
    pub fn embeddings(&self) -> EmbeddingTable {
        EmbeddingTable::from_parts(self.vocabulary.clone(), self.embedding.value.clone())
            .expect("vocabulary and vectors stay consistent")
    }

    fn embed(&self, tokens: &[usize]) -> Result<Tensor> {
        if tokens.is_empty() {
            return Err(Error::invalid("extract_text", "empty token sequence"));
        }
        if tokens.len() != self.config.max_tokens {
            return Err(Error::invalid(
                "extract_text",
                format!("expected {} tokens, got {}", self.config.max_tokens, tokens.len()),
            ));
        }
        let vocab = self.embedding.shape()[0];
        let d = self.embedding.shape()[1];
        let table = self.embedding.value.data();
        let mut data = Vec::with_capacity(tokens.len() * d);
        for &id in tokens {
            if id >= vocab {
                return Err(Error::invalid(
                    "extract_text",
                    format!("token id {id} outside vocabulary of {vocab}"),
                ));
            }
            data.extend_from_slice(&table[id * d..(id + 1) * d]);
        }
        Tensor::new(vec![tokens.len(), d], data)
    }

    fn pool_maps(&self, maps: &[Tensor]) -> Result<Tensor> {
        let mut flat = Vec::new();
        for bank in maps {
            let steps = bank.shape()[1];
            for row in bank.data().chunks_exact(steps) {
                let pooled = self.pools[0].forward(&Tensor::vector(row.to_vec())?)?;
                flat.extend(pooled.into_data());
            }
        }
        Tensor::vector(flat)
    }

    pub fn forward(&self, tokens: &[usize]) -> Result<Tensor> {
        let x = self.embed(tokens)?;
        let maps = self.conv.forward(&x)?;
        let pooled = self.pool_maps(&maps)?;
        Ok(relu(&self.dense.forward(&pooled)?))
    }

    pub fn forward_train(&mut self, tokens: &[usize]) -> Result<Tensor> {
        let x = self.embed(tokens)?;
        let maps = self.conv.forward_train(&x)?;
        let mut flat = Vec::new();
        let mut pools = self.pools.iter_mut();
        for bank in &maps {
            let steps = bank.shape()[1];
            for row in bank.data().chunks_exact(steps) {
                let pool = pools.next().expect("one pool per map");
                flat.extend(pool.forward_train(&Tensor::vector(row.to_vec())?)?.into_data());
            }
        }
        let hidden = self.dense.forward_train(&Tensor::vector(flat)?)?;
        self.tokens = Some(tokens.to_vec());
        Ok(self.relu.forward_train(&hidden))
    }

    /// Backpropagates `dL/dt_f`; in non-static mode also accumulates
    /// gradients for the embedding rows used (the padding row never changes).
    pub fn backward(&mut self, grad: &Tensor) -> Result<()> {
        let tokens = self
            .tokens
            .take()
            .ok_or(Error::BackwardBeforeForward { layer: "text extractor" })?;
        let g = self.relu.backward(grad)?;
        let g = self.dense.backward(&g)?;
        let mut offset = 0;
        let mut pools = self.pools.iter_mut();
        let mut bank_grads = Vec::with_capacity(self.config.widths.len());
        for &w in &self.config.widths {
            let steps = self.config.max_tokens - w + 1;
            let pooled = steps / self.config.pool;
            let mut data = Vec::with_capacity(self.config.maps * steps);
            for _ in 0..self.config.maps {
                let slice = Tensor::vector(g.data()[offset..offset + pooled].to_vec())?;
                offset += pooled;
                let pool = pools.next().expect("one pool per map");
                data.extend(pool.backward(&slice)?.into_data());
            }
            bank_grads.push(Tensor::new(vec![self.config.maps, steps], data)?);
        }
        let gx = self.conv.backward(&bank_grads)?;
        if self.mode == TextMode::NonStatic {
            let d = self.embedding.shape()[1];
            let ge = self.embedding.grad.data_mut();
            for (t, &id) in tokens.iter().enumerate() {
                if id != PAD_ID {
                    axpy(1.0, &gx.data()[t * d..(t + 1) * d], &mut ge[id * d..(id + 1) * d]);
                }
            }
        }
        Ok(())
    }
}

impl Parameterized for TextExtractor {
    fn params(&self) -> Vec<&Param> {
        let mut p = vec![&self.embedding];
        p.extend(self.conv.params());
        p.extend(self.dense.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = vec![&mut self.embedding];
        p.extend(self.conv.params_mut());
        p.extend(self.dense.params_mut());
        p
    }
}
