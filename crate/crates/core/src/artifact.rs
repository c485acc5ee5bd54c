//! Versioned binary model files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "MMDDMODL"                     8 bytes
//! version                        u32
//! echo length, echo JSON         u32, bytes    (model config plus caller metadata)
//! vocabulary size, tokens        u32, then per token: u32 length, UTF-8 bytes
//! stats flag                     u8            (1 if standardisation follows)
//!   dim, means, stds             u32, f64 × dim, f64 × dim
//! parameter count                u32
//!   per parameter: name (u32 length, bytes), frozen u8, rank u32,
//!   extents u32 × rank, values f64 × product(extents)
//! ```

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{EmbeddingTable, StandardizationStats};
use crate::model::{DeceptionModel, ModelConfig, Preprocessing};
use crate::nn::Parameterized;
use crate::{Error, Result, Tensor};

pub const MAGIC: &[u8; 8] = b"MMDDMODL";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Echo {
    model: ModelConfig,
    #[serde(default)]
    metadata: serde_json::Value,
}

/// A trained model plus free-form metadata recorded alongside it.
#[derive(Debug, Clone)]
pub struct ModelArtifact {
    pub model: DeceptionModel,
    pub metadata: serde_json::Value,
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Artifact(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_bytes(out: &mut Vec<u8>, bytes: &[u8]) -> Result<()> {
    put_u32(out, bytes.len())?;
    out.extend_from_slice(bytes);
    Ok(())
}

fn put_f64s(out: &mut Vec<u8>, values: &[f64]) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serialises `model` and `metadata`. Identical models give identical bytes.
pub fn to_bytes(model: &DeceptionModel, metadata: &serde_json::Value) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let echo = Echo {
        model: model.config().clone(),
        metadata: metadata.clone(),
    };
    put_bytes(&mut out, serde_json::to_string(&echo).expect("echo serialises").as_bytes())?;

    let prep = model.preprocessing();
    let tokens = prep.embeddings.as_ref().map_or(&[][..], |e| e.tokens());
    put_u32(&mut out, tokens.len())?;
    for t in tokens {
        put_bytes(&mut out, t.as_bytes())?;
    }
    match &prep.stats {
        Some(s) => {
            out.push(1);
            put_u32(&mut out, s.mean().len())?;
            put_f64s(&mut out, s.mean());
            put_f64s(&mut out, s.std());
        }
        None => out.push(0),
    }

    let names = model.param_names();
    let params = model.params();
    put_u32(&mut out, params.len())?;
    for (name, p) in names.iter().zip(params) {
        put_bytes(&mut out, name.as_bytes())?;
        out.push(u8::from(p.frozen));
        put_u32(&mut out, p.shape().len())?;
        for &d in p.shape() {
            put_u32(&mut out, d)?;
        }
        put_f64s(&mut out, p.value.data());
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Artifact(format!("truncated while reading {what} at byte {}", self.pos))
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let n = self.u32(what)?;
        let b = self.take(n, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| Error::Artifact(format!("{what} is not UTF-8")))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n.checked_mul(8).ok_or_else(|| Error::Artifact(format!("{what} too large")))?;
        Ok(self
            .take(len, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }
}

/// Parses bytes written by [`to_bytes`].
pub fn from_bytes(bytes: &[u8]) -> Result<ModelArtifact> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err(Error::Artifact("not a model artifact (bad magic bytes)".into()));
    }
    let version = r.u32("version")? as u32;
    if version != FORMAT_VERSION {
        return Err(Error::Artifact(format!(
            "artifact format version {version}, this build reads version {FORMAT_VERSION}"
        )));
    }
    let echo: Echo = serde_json::from_str(&r.string("config echo")?)
        .map_err(|e| Error::Artifact(format!("config echo: {e}")))?;

    let n_tokens = r.u32("vocabulary size")?;
    let tokens = (0..n_tokens).map(|_| r.string("token")).collect::<Result<Vec<_>>>()?;
    let stats = match r.u8("stats flag")? {
        0 => None,
        1 => {
            let dim = r.u32("stats dimension")?;
            let mean = r.f64s(dim, "means")?;
            let std = r.f64s(dim, "standard deviations")?;
            Some(StandardizationStats::from_parts(mean, std)?)
        }
        f => return Err(Error::Artifact(format!("bad stats flag {f}"))),
    };

    let n_params = r.u32("parameter count")?;
    let mut stored = Vec::with_capacity(n_params);
    for _ in 0..n_params {
        let name = r.string("parameter name")?;
        let frozen = r.u8("frozen flag")? != 0;
        let rank = r.u32("rank")?;
        let shape = (0..rank).map(|_| r.u32("extent")).collect::<Result<Vec<_>>>()?;
        let count = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let count = count.ok_or_else(|| Error::Artifact(format!("`{name}` is too large")))?;
        let values = r.f64s(count, &name)?;
        stored.push((name, frozen, Tensor::new(shape, values)?));
    }
    if r.pos != bytes.len() {
        return Err(Error::Artifact(format!("{} trailing bytes", bytes.len() - r.pos)));
    }

    // Rebuild the architecture, then overwrite every parameter.
    let embeddings = if tokens.is_empty() {
        None
    } else {
        let (_, _, table) = stored
            .iter()
            .find(|(n, _, _)| n == "text.embedding")
            .ok_or_else(|| Error::Artifact("vocabulary without text.embedding".into()))?;
        Some(EmbeddingTable::from_parts(tokens, table.clone())?)
    };
    let prep = Preprocessing { stats, embeddings };
    let mut model = DeceptionModel::new(echo.model, prep, &mut ChaCha8Rng::seed_from_u64(0))?;
    let names = model.param_names();
    if names.len() != stored.len() {
        return Err(Error::Artifact(format!(
            "architecture has {} parameters, artifact stores {}",
            names.len(),
            stored.len()
        )));
    }
    for ((name, p), (stored_name, frozen, value)) in names.iter().zip(model.params_mut()).zip(stored) {
        if *name != stored_name || p.shape() != value.shape() {
            return Err(Error::Artifact(format!(
                "parameter `{stored_name}` {:?} does not match `{name}` {:?}",
                value.shape(),
                p.shape()
            )));
        }
        p.value = value;
        p.frozen = frozen;
    }
    Ok(ModelArtifact {
        model,
        metadata: echo.metadata,
    })
}

pub fn save(path: &Path, model: &DeceptionModel, metadata: &serde_json::Value) -> Result<()> {
    fs::write(path, to_bytes(model, metadata)?).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<ModelArtifact> {
    from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}
