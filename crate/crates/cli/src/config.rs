//! Run configuration: one TOML file per experiment, overridable from the
//! command line.
//!
//! ```toml
//! seed = 42
//! k = 10
//! jobs = 1
//!
//! [data]
//! manifest = "data/manifest.jsonl"   # or a [data.synthetic] table
//!
//! [model]
//! preset = "toy"                     # or "full"
//! fusion = "hadamard_concat"
//! text_mode = "non-static"
//!
//! [train]
//! epochs = 200
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use mmdd_core::data::{generate_synthetic, load_manifest, Dataset, SyntheticSpec};
use mmdd_core::extractors::{TextConfig, TextMode, VisualConfig};
use mmdd_core::fusion::FusionScheme;
use mmdd_core::model::ModelConfig;
use mmdd_core::training::TrainConfig;
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_K: usize = 10;

/// A problem with the configuration rather than the data or the numerics.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Toy,
    Full,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub manifest: Option<PathBuf>,
    pub synthetic: Option<SyntheticSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub preset: Preset,
    pub fusion: Option<FusionScheme>,
    pub text_mode: Option<TextMode>,
    pub visual: Option<VisualConfig>,
    pub text: Option<TextConfig>,
    pub embedding_dim: Option<usize>,
    pub hidden: Option<usize>,
    pub keep_prob: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds data generation, fold assignment and training. Overrides
    /// `train.seed`.
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub data: DataSection,
    pub model: ModelSection,
    pub train: TrainConfig,
}

impl RunConfig {
    /// Reads `path`; relative data paths resolve against the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        if let (Some(m), Some(dir)) = (&config.data.manifest, path.parent()) {
            if m.is_relative() {
                config.data.manifest = Some(dir.join(m));
            }
        }
        Ok(config)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn k(&self) -> usize {
        self.k.unwrap_or(DEFAULT_K)
    }

    pub fn jobs(&self) -> usize {
        self.jobs.unwrap_or(1)
    }

    pub fn out(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed(),
            ..self.train.clone()
        }
    }

    pub fn model_config(&self) -> anyhow::Result<ModelConfig> {
        let m = &self.model;
        let mut config = match m.preset {
            Preset::Toy => ModelConfig::toy(),
            Preset::Full => ModelConfig::full(),
        };
        if let Some(f) = m.fusion {
            config.fusion = f;
        }
        if let Some(t) = m.text_mode {
            config.text_mode = t;
        }
        if let Some(v) = &m.visual {
            config.visual = v.clone();
        }
        if let Some(t) = &m.text {
            config.text = t.clone();
        }
        if let Some(d) = m.embedding_dim {
            config.embedding_dim = d;
        }
        if let Some(h) = m.hidden {
            config.hidden = h;
        }
        if let Some(p) = m.keep_prob {
            config.keep_prob = p;
        }
        config.validate().map_err(|e| config_error(e.to_string()))?;
        Ok(config)
    }

    /// The synthetic spec for this run, with the run seed applied.
    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            seed: self.seed(),
            ..self.data.synthetic.clone().unwrap_or_default()
        }
    }

    /// Loads or generates the dataset; exactly one source must be set.
    pub fn dataset(&self) -> anyhow::Result<Dataset> {
        match (&self.data.manifest, &self.data.synthetic) {
            (Some(path), None) => Ok(load_manifest(path)?),
            (None, Some(_)) => Ok(generate_synthetic(&self.synthetic_spec())?.dataset),
            (Some(_), Some(_)) => Err(config_error("set only one of data.manifest and data.synthetic")),
            (None, None) => Err(config_error(
                "no data source: pass --data or set data.manifest or data.synthetic",
            )),
        }
    }
}
