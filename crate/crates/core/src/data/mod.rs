//! Dataset records, on-disk formats, tokenisation, standardisation and the
//! synthetic generator.

mod embedding;
mod formats;
mod manifest;
mod standardize;
mod synthetic;

pub use embedding::{tokenize, words, EmbeddingTable, PAD_ID, PAD_TOKEN, UNK_ID, UNK_TOKEN};
pub use formats::{read_audio_csv, read_micro_csv, read_video, write_audio_csv, write_micro_csv, write_video};
pub use manifest::{load_manifest, write_dataset, ManifestHeader, SampleRecord, MANIFEST_FILE};
pub use standardize::{zstandardize, StandardizationStats, STD_FLOOR};
pub use synthetic::{generate_synthetic, PlantedSignal, SignalStrength, SyntheticDataset, SyntheticSpec};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::extractors::MicroExpressionVector;
use crate::Tensor;

/// Ground-truth class. Deceptive is class index 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Truthful,
    Deceptive,
}

impl Label {
    pub fn index(self) -> usize {
        match self {
            Label::Truthful => 0,
            Label::Deceptive => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::Truthful),
            1 => Some(Label::Deceptive),
            _ => None,
        }
    }

    pub fn is_deceptive(self) -> bool {
        self == Label::Deceptive
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Truthful => "truthful",
            Label::Deceptive => "deceptive",
        })
    }
}

/// One video's worth of data with every modality loaded and validated.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub subject: String,
    pub label: Label,
    pub transcript: String,
    /// Raw (unstandardised) acoustic functionals, length 6373.
    pub audio: Tensor,
    /// `(channels, frames, height, width)`.
    pub video: Tensor,
    pub micro: MicroExpressionVector,
}

/// A loaded dataset: samples plus dataset-level metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub video_shape: [usize; 4],
    pub samples: Vec<Sample>,
    /// Pretrained word vectors, when the dataset ships them.
    pub embeddings: Option<EmbeddingTable>,
}

impl Dataset {
    pub fn subjects(&self) -> std::collections::BTreeSet<&str> {
        self.samples.iter().map(|s| s.subject.as_str()).collect()
    }

    pub fn label_counts(&self) -> (usize, usize) {
        let deceptive = self.samples.iter().filter(|s| s.label.is_deceptive()).count();
        (self.samples.len() - deceptive, deceptive)
    }
}
