//! Word vectors and transcript tokenisation.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::{Error, Result, Tensor};

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Vocabulary plus one vector per token. Ids 0 and 1 are reserved for the
/// padding and unknown tokens; the padding vector is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Tensor,
}

impl EmbeddingTable {
    /// Builds a table from `(word, vector)` pairs; PAD and UNK are prepended
    /// with zero vectors.
    pub fn new(words: Vec<(String, Vec<f64>)>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embeddings", "dimension must be positive"));
        }
        let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        let mut data = vec![0.0; 2 * dim];
        for (word, vec) in words {
            if vec.len() != dim {
                return Err(Error::invalid(
                    "embeddings",
                    format!("`{word}` has {} values, expected {dim}", vec.len()),
                ));
            }
            tokens.push(word);
            data.extend(vec);
        }
        let vectors = Tensor::new(vec![tokens.len(), dim], data)?;
        EmbeddingTable::from_parts(tokens, vectors)
    }

    /// Reassembles a table from its token list (including PAD and UNK at
    /// ids 0 and 1) and the `vocab × dim` matrix.
    pub fn from_parts(tokens: Vec<String>, vectors: Tensor) -> Result<Self> {
        if tokens.len() < 2 || tokens[PAD_ID] != PAD_TOKEN || tokens[UNK_ID] != UNK_TOKEN {
            return Err(Error::invalid("embeddings", "token list must start with <pad>, <unk>"));
        }
        if vectors.rank() != 2 || vectors.shape()[0] != tokens.len() {
            return Err(Error::invalid(
                "embeddings",
                format!("{} tokens but vectors of shape {:?}", tokens.len(), vectors.shape()),
            ));
        }
        let dim = vectors.shape()[1];
        if vectors.data()[..dim].iter().any(|&v| v != 0.0) {
            return Err(Error::invalid("embeddings", "padding vector must be zero"));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::invalid("embeddings", format!("duplicate token `{t}`")));
            }
        }
        Ok(EmbeddingTable {
            tokens,
            index,
            vectors,
        })
    }

    /// Random vectors, uniform in ±0.25, for every distinct word.
    pub fn random<R: Rng + ?Sized>(
        words: impl IntoIterator<Item = String>,
        dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for w in words {
            if w != PAD_TOKEN && w != UNK_TOKEN && seen.insert(w.clone()) {
                let v = (0..dim).map(|_| rng.random_range(-0.25..0.25)).collect();
                out.push((w, v));
            }
        }
        EmbeddingTable::new(out, dim)
    }

    /// Reads the plain-text vector format: one `token v1 … vd` line per word.
    /// A leading `count dim` header line is accepted and skipped.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut words = Vec::new();
        let mut dim = None;
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                continue;
            }
            let word = fields[0].to_string();
            if word == PAD_TOKEN || word == UNK_TOKEN {
                return Err(parse_err(i + 1, format!("reserved token `{word}`")));
            }
            let vec = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|e| parse_err(i + 1, format!("`{f}`: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            if vec.is_empty() || vec.iter().any(|v| !v.is_finite()) {
                return Err(parse_err(i + 1, format!("`{word}` needs finite components")));
            }
            match dim {
                None => dim = Some(vec.len()),
                Some(d) if d != vec.len() => {
                    return Err(parse_err(
                        i + 1,
                        format!("`{word}` has {} components, expected {d}", vec.len()),
                    ))
                }
                _ => {}
            }
            words.push((word, vec));
        }
        let dim = dim.ok_or_else(|| parse_err(1, "no word vectors".into()))?;
        EmbeddingTable::new(words, dim).map_err(|e| match e {
            Error::InvalidArgument { msg, .. } => parse_err(0, msg),
            other => other,
        })
    }

    /// Writes every word except PAD and UNK in the format read by [`load`](Self::load).
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (id, token) in self.tokens.iter().enumerate().skip(2) {
            out.push_str(token);
            for v in self.vector(id) {
                write!(out, " {v}").expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn dim(&self) -> usize {
        self.vectors.shape()[1]
    }

    /// Vocabulary size including PAD and UNK.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn vector(&self, id: usize) -> &[f64] {
        let d = self.dim();
        &self.vectors.data()[id * d..(id + 1) * d]
    }

    pub fn vectors(&self) -> &Tensor {
        &self.vectors
    }
}

/// Lower-cases, turns punctuation into separators and splits on whitespace.
pub fn words(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .map(|c| if c.is_ascii_punctuation() { ' ' } else { c })
        .collect();
    cleaned.split_whitespace().map(str::to_lowercase).collect()
}

/// Token ids for `text`, padded with PAD or truncated to exactly `max_len`.
pub fn tokenize(text: &str, table: &EmbeddingTable, max_len: usize) -> Vec<usize> {
    let mut ids: Vec<usize> = words(text).iter().take(max_len).map(|w| table.id(w)).collect();
    if ids.is_empty() {
        log::warn!("empty transcript; using an all-padding sequence");
    }
    ids.resize(max_len, PAD_ID);
    ids
}
