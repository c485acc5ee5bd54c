//! The complete graph: per-modality extractors, fusion and the classifier,
//! trained end to end.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{predict, DeceptionMlp, Prediction, HIDDEN_DIM, KEEP_PROB};
use crate::data::{tokenize, words, EmbeddingTable, Label, Sample, StandardizationStats};
use crate::extractors::{AudioReducer, TextConfig, TextExtractor, TextMode, VisualConfig, VisualExtractor, FEATURE_DIM};
use crate::fusion::{fuse_concat, fuse_hadamard_concat, hadamard_concat_backward, FusedVector, FusionScheme, Modality};
use crate::nn::{Param, Parameterized};
use crate::{Error, Result, Tensor};

/// Architecture of one model: which fusion scheme, how text is embedded,
/// and the extractor geometries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub fusion: FusionScheme,
    pub text_mode: TextMode,
    pub visual: VisualConfig,
    pub text: TextConfig,
    /// Dimension of randomly initialised word vectors, used only when the
    /// dataset ships no embeddings.
    pub embedding_dim: usize,
    pub hidden: usize,
    pub keep_prob: f64,
}

impl ModelConfig {
    /// Full-size extractors: 16 frames of 64×64 RGB, 128-token transcripts,
    /// 300-dimensional word vectors.
    pub fn full() -> Self {
        ModelConfig {
            fusion: FusionScheme::HadamardConcat,
            text_mode: TextMode::NonStatic,
            visual: VisualConfig::full(),
            text: TextConfig::full(),
            embedding_dim: 300,
            hidden: HIDDEN_DIM,
            keep_prob: KEEP_PROB,
        }
    }

    /// Small extractors for desk-scale synthetic experiments; the feature
    /// and classifier widths are unchanged.
    pub fn toy() -> Self {
        ModelConfig {
            visual: VisualConfig {
                input_shape: [3, 8, 12, 12],
                maps: 4,
                kernel: [3, 3, 3],
                pool: 2,
            },
            text: TextConfig {
                max_tokens: 16,
                widths: vec![3, 5, 8],
                maps: 4,
                pool: 2,
            },
            embedding_dim: 16,
            ..ModelConfig::full()
        }
    }

    pub fn with_fusion(self, fusion: FusionScheme) -> Self {
        ModelConfig { fusion, ..self }
    }

    pub fn with_text_mode(self, text_mode: TextMode) -> Self {
        ModelConfig { text_mode, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fusion.uses(Modality::Visual) {
            self.visual.pooled_shape()?;
        }
        if self.fusion.uses(Modality::Text) {
            self.text.pooled_len()?;
            if self.embedding_dim == 0 {
                return Err(Error::invalid("model config", "embedding_dim must be positive"));
            }
        }
        if self.hidden == 0 {
            return Err(Error::invalid("model config", "hidden must be positive"));
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return Err(Error::invalid(
                "model config",
                format!("keep_prob must be in (0, 1], got {}", self.keep_prob),
            ));
        }
        Ok(())
    }
}

/// A sample converted into exactly the inputs the model consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    pub tokens: Option<Vec<usize>>,
    /// Standardised acoustic features.
    pub audio: Option<Tensor>,
    pub video: Option<Tensor>,
    pub micro: Option<Tensor>,
    pub label: Label,
}

/// Statistics a model derives from its training split before training:
/// audio standardisation and the word vectors it starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessing {
    pub stats: Option<StandardizationStats>,
    pub embeddings: Option<EmbeddingTable>,
}

impl Preprocessing {
    /// Fits everything from `train` alone. Without `pretrained` vectors the
    /// table covers the training transcripts' words with random vectors, so
    /// test-only words map to the unknown token.
    pub fn fit<R: Rng + ?Sized>(
        config: &ModelConfig,
        train: &[&Sample],
        pretrained: Option<&EmbeddingTable>,
        rng: &mut R,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Data("empty training split".into()));
        }
        let stats = if config.fusion.uses(Modality::Audio) {
            let audio: Vec<&Tensor> = train.iter().map(|s| &s.audio).collect();
            Some(StandardizationStats::fit(&audio)?)
        } else {
            None
        };
        let embeddings = if config.fusion.uses(Modality::Text) {
            Some(match pretrained {
                Some(table) => table.clone(),
                None => EmbeddingTable::random(
                    train.iter().flat_map(|s| words(&s.transcript)),
                    config.embedding_dim,
                    rng,
                )?,
            })
        } else {
            None
        };
        Ok(Preprocessing { stats, embeddings })
    }
}

/// Branch outputs kept between `forward_train` and `backward`, needed by
/// the Hadamard product rule.
#[derive(Debug, Clone)]
struct FeatureCache {
    t: Tensor,
    a: Tensor,
    v: Tensor,
}

#[derive(Debug, Clone)]
pub struct DeceptionModel {
    config: ModelConfig,
    /// Token lookup; the vectors themselves live in the text extractor.
    vocabulary: Option<EmbeddingTable>,
    stats: Option<StandardizationStats>,
    pub text: Option<TextExtractor>,
    pub audio: Option<AudioReducer>,
    pub visual: Option<VisualExtractor>,
    pub mlp: DeceptionMlp,
    cache: Option<FeatureCache>,
}

impl DeceptionModel {
    /// Fresh parameters, initialised from `rng` in the order text, audio,
    /// visual, classifier.
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, prep: Preprocessing, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let scheme = config.fusion;
        let text = if scheme.uses(Modality::Text) {
            let table = prep
                .embeddings
                .as_ref()
                .ok_or_else(|| Error::invalid("model", "text branch needs word vectors"))?;
            Some(TextExtractor::new(config.text.clone(), table, config.text_mode, rng)?)
        } else {
            None
        };
        let audio = if scheme.uses(Modality::Audio) {
            if prep.stats.is_none() {
                return Err(Error::invalid("model", "audio branch needs standardisation statistics"));
            }
            Some(AudioReducer::new(rng))
        } else {
            None
        };
        let visual = if scheme.uses(Modality::Visual) {
            Some(VisualExtractor::new(config.visual.clone(), rng)?)
        } else {
            None
        };
        let mlp = DeceptionMlp::new(scheme.input_dim(), config.hidden, config.keep_prob, rng)?;
        Ok(DeceptionModel {
            vocabulary: prep.embeddings,
            stats: prep.stats,
            config,
            text,
            audio,
            visual,
            mlp,
            cache: None,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn scheme(&self) -> FusionScheme {
        self.config.fusion
    }

    /// The preprocessing this model was built with. Word vectors are the
    /// initial ones; see [`TextExtractor::embeddings`] for the tuned table.
    pub fn preprocessing(&self) -> Preprocessing {
        Preprocessing {
            stats: self.stats.clone(),
            embeddings: self.vocabulary.clone(),
        }
    }

    pub fn prepare(&self, sample: &Sample) -> Result<PreparedSample> {
        let scheme = self.config.fusion;
        let tokens = match &self.vocabulary {
            Some(v) if scheme.uses(Modality::Text) => Some(tokenize(&sample.transcript, v, self.config.text.max_tokens)),
            _ => None,
        };
        let audio = match &self.stats {
            Some(stats) if scheme.uses(Modality::Audio) => Some(stats.apply(&sample.audio).map_err(|e| {
                Error::InvalidSample {
                    sample: sample.id.clone(),
                    msg: e.to_string(),
                }
            })?),
            _ => None,
        };
        let video = if scheme.uses(Modality::Visual) {
            if sample.video.shape() != self.config.visual.input_shape {
                return Err(Error::InvalidSample {
                    sample: sample.id.clone(),
                    msg: format!(
                        "video shape {:?} does not match the model's {:?}",
                        sample.video.shape(),
                        self.config.visual.input_shape
                    ),
                });
            }
            Some(sample.video.clone())
        } else {
            None
        };
        let micro = scheme.uses(Modality::Micro).then(|| sample.micro.to_tensor());
        Ok(PreparedSample {
            tokens,
            audio,
            video,
            micro,
            label: sample.label,
        })
    }

    fn missing(modality: Modality) -> Error {
        Error::invalid("model", format!("prepared sample lacks {modality} input"))
    }

    /// Branch outputs `[t, a, v, m]` for the modalities the scheme uses.
    fn features(&self, x: &PreparedSample) -> Result<[Option<Tensor>; 4]> {
        let mut out: [Option<Tensor>; 4] = Default::default();
        if let Some(t) = &self.text {
            out[0] = Some(t.forward(x.tokens.as_deref().ok_or_else(|| Self::missing(Modality::Text))?)?);
        }
        if let Some(a) = &self.audio {
            out[1] = Some(a.forward(x.audio.as_ref().ok_or_else(|| Self::missing(Modality::Audio))?)?);
        }
        if let Some(v) = &self.visual {
            out[2] = Some(v.forward(x.video.as_ref().ok_or_else(|| Self::missing(Modality::Visual))?)?);
        }
        if self.config.fusion.uses(Modality::Micro) {
            out[3] = Some(x.micro.clone().ok_or_else(|| Self::missing(Modality::Micro))?);
        }
        Ok(out)
    }

    fn fuse_features(&self, f: [Option<Tensor>; 4]) -> Result<FusedVector> {
        let scheme = self.config.fusion;
        let [t, a, v, m] = f;
        match scheme {
            FusionScheme::Unimodal(modality) => {
                let i = Modality::ALL.iter().position(|&x| x == modality).expect("known modality");
                let values = [t, a, v, m][i].take().expect("branch computed");
                Ok(FusedVector { values, scheme })
            }
            FusionScheme::Concat | FusionScheme::HadamardConcat => {
                let (t, a, v, m) = (t.unwrap(), a.unwrap(), v.unwrap(), m.unwrap());
                if scheme == FusionScheme::Concat {
                    fuse_concat(&t, &a, &v, &m)
                } else {
                    fuse_hadamard_concat(&t, &a, &v, &m)
                }
            }
        }
    }

    /// The fused vector `z_f` in evaluation mode.
    pub fn fuse(&self, x: &PreparedSample) -> Result<FusedVector> {
        self.fuse_features(self.features(x)?)
    }

    /// Evaluation-mode logits.
    pub fn forward(&self, x: &PreparedSample) -> Result<Tensor> {
        self.mlp.forward(&self.fuse(x)?.values)
    }

    pub fn predict(&self, x: &PreparedSample) -> Result<Prediction> {
        predict(&self.forward(x)?)
    }

    /// Training-mode logits (dropout active); records everything
    /// [`backward`](Self::backward) needs.
    pub fn forward_train<R: Rng + ?Sized>(&mut self, x: &PreparedSample, rng: &mut R) -> Result<Tensor> {
        let mut f: [Option<Tensor>; 4] = Default::default();
        if let Some(text) = self.text.as_mut() {
            let tokens = x.tokens.as_deref().ok_or_else(|| Self::missing(Modality::Text))?;
            f[0] = Some(text.forward_train(tokens)?);
        }
        if let Some(audio) = self.audio.as_mut() {
            f[1] = Some(audio.forward_train(x.audio.as_ref().ok_or_else(|| Self::missing(Modality::Audio))?)?);
        }
        if let Some(visual) = self.visual.as_mut() {
            f[2] = Some(visual.forward_train(x.video.as_ref().ok_or_else(|| Self::missing(Modality::Visual))?)?);
        }
        if self.config.fusion.uses(Modality::Micro) {
            f[3] = Some(x.micro.clone().ok_or_else(|| Self::missing(Modality::Micro))?);
        }
        self.cache = match (&self.config.fusion, &f) {
            (FusionScheme::HadamardConcat, [Some(t), Some(a), Some(v), _]) => Some(FeatureCache {
                t: t.clone(),
                a: a.clone(),
                v: v.clone(),
            }),
            _ => None,
        };
        let z = self.fuse_features(f)?;
        self.mlp.forward_train(&z.values, rng)
    }

    /// Accumulates gradients of every parameter given `dL/dlogits`.
    pub fn backward(&mut self, grad_logits: &Tensor) -> Result<()> {
        let dz = self.mlp.backward(grad_logits)?;
        let slice = |lo: usize| Tensor::vector(dz.data()[lo..lo + FEATURE_DIM].to_vec());
        let (dt, da, dv) = match self.config.fusion {
            FusionScheme::Unimodal(Modality::Text) => (Some(dz), None, None),
            FusionScheme::Unimodal(Modality::Audio) => (None, Some(dz), None),
            FusionScheme::Unimodal(Modality::Visual) => (None, None, Some(dz)),
            FusionScheme::Unimodal(Modality::Micro) => (None, None, None),
            FusionScheme::Concat => (Some(slice(0)?), Some(slice(FEATURE_DIM)?), Some(slice(2 * FEATURE_DIM)?)),
            FusionScheme::HadamardConcat => {
                let c = self
                    .cache
                    .take()
                    .ok_or(Error::BackwardBeforeForward { layer: "fusion" })?;
                let (dt, da, dv) = hadamard_concat_backward(&c.t, &c.a, &c.v, &dz)?;
                (Some(dt), Some(da), Some(dv))
            }
        };
        if let (Some(g), Some(text)) = (dt, self.text.as_mut()) {
            text.backward(&g)?;
        }
        if let (Some(g), Some(audio)) = (da, self.audio.as_mut()) {
            audio.backward(&g)?;
        }
        if let (Some(g), Some(visual)) = (dv, self.visual.as_mut()) {
            visual.backward(&g)?;
        }
        Ok(())
    }

    /// Parameter names, aligned with [`Parameterized::params`].
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if let Some(text) = &self.text {
            names.push("text.embedding".to_string());
            for w in text.conv.widths() {
                names.push(format!("text.conv{w}.weight"));
                names.push(format!("text.conv{w}.bias"));
            }
            names.extend(["text.dense.weight", "text.dense.bias"].map(String::from));
        }
        if self.audio.is_some() {
            names.extend(["audio.dense.weight", "audio.dense.bias"].map(String::from));
        }
        if self.visual.is_some() {
            names.extend(
                ["visual.conv.weight", "visual.conv.bias", "visual.dense.weight", "visual.dense.bias"]
                    .map(String::from),
            );
        }
        names.extend(
            ["mlp.hidden.weight", "mlp.hidden.bias", "mlp.output.weight", "mlp.output.bias"].map(String::from),
        );
        names
    }
}

impl Parameterized for DeceptionModel {
    fn params(&self) -> Vec<&Param> {
        let mut p = Vec::new();
        if let Some(t) = &self.text {
            p.extend(t.params());
        }
        if let Some(a) = &self.audio {
            p.extend(a.params());
        }
        if let Some(v) = &self.visual {
            p.extend(v.params());
        }
        p.extend(self.mlp.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut p = Vec::new();
        if let Some(t) = self.text.as_mut() {
            p.extend(t.params_mut());
        }
        if let Some(a) = self.audio.as_mut() {
            p.extend(a.params_mut());
        }
        if let Some(v) = self.visual.as_mut() {
            p.extend(v.params_mut());
        }
        p.extend(self.mlp.params_mut());
        p
    }
}
