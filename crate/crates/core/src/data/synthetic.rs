//! Seeded synthetic datasets with a controllable, label-dependent signal in
//! each modality. At strength 0 every modality is independent of the label.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{words, Dataset, EmbeddingTable, Label, Sample};
use crate::extractors::{validate_micro, AUDIO_DIM, MICRO_DIM};
use crate::{Error, Result, Tensor};

/// Number of acoustic features that carry the label.
const AUDIO_SIGNAL_DIMS: usize = 64;
/// Number of micro-expression indicators that carry the label.
const MICRO_SIGNAL_DIMS: usize = 8;
const MICRO_BASE_RATE: f64 = 0.3;

/// Per-modality signal strength, in units of the noise standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalStrength {
    pub audio: f64,
    pub visual: f64,
    pub text: f64,
    pub micro: f64,
}

impl SignalStrength {
    pub fn uniform(s: f64) -> Self {
        SignalStrength {
            audio: s,
            visual: s,
            text: s,
            micro: s,
        }
    }

    fn all(&self) -> [f64; 4] {
        [self.audio, self.visual, self.text, self.micro]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub name: String,
    pub samples: usize,
    pub subjects: usize,
    pub strength: SignalStrength,
    /// Standard deviation of the per-sample noise.
    pub noise: f64,
    /// Standard deviation of the per-subject offset shared by all of a
    /// subject's samples.
    pub identity: f64,
    pub seed: u64,
    pub video_shape: [usize; 4],
    pub embedding_dim: usize,
    /// Number of words; half lean deceptive, half lean truthful.
    pub vocab_size: usize,
    pub transcript_words: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            name: "synthetic".into(),
            samples: 40,
            subjects: 10,
            strength: SignalStrength::uniform(2.0),
            noise: 1.0,
            identity: 0.5,
            seed: 42,
            video_shape: [3, 8, 12, 12],
            embedding_dim: 16,
            vocab_size: 64,
            transcript_words: 12,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::invalid("synthetic", msg));
        if self.samples < 2 {
            return bad(format!("need at least 2 samples, got {}", self.samples));
        }
        if self.subjects == 0 || self.subjects > self.samples {
            return bad(format!(
                "subjects must be in 1..={}, got {}",
                self.samples, self.subjects
            ));
        }
        if self.video_shape.contains(&0) {
            return bad(format!("video shape {:?} has a zero extent", self.video_shape));
        }
        if self.embedding_dim == 0 || self.transcript_words == 0 {
            return bad("embedding_dim and transcript_words must be positive".into());
        }
        if self.vocab_size < 2 || !self.vocab_size.is_multiple_of(2) {
            return bad(format!("vocab_size must be even and at least 2, got {}", self.vocab_size));
        }
        if !(self.noise.is_finite() && self.noise > 0.0) {
            return bad(format!("noise must be positive, got {}", self.noise));
        }
        if !(self.identity.is_finite() && self.identity >= 0.0) {
            return bad(format!("identity must be non-negative, got {}", self.identity));
        }
        if self.strength.all().iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return bad(format!("strengths must be non-negative, got {:?}", self.strength));
        }
        Ok(())
    }
}

/// Where the signal was planted; enough to score a sample with a fixed
/// linear probe that needs no training.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSignal {
    audio_mean: Vec<f64>,
    audio_scale: Vec<f64>,
    /// `(feature, sign)` pairs.
    audio_direction: Vec<(usize, f64)>,
    /// `(voxel, sign)` pairs.
    video_pattern: Vec<(usize, f64)>,
    micro_indices: Vec<usize>,
    deceptive_words: Vec<String>,
    truthful_words: Vec<String>,
}

impl PlantedSignal {
    /// Sum of per-modality probe scores, each normalised by the number of
    /// coordinates it reads. Larger means more deceptive.
    pub fn probe_score(&self, sample: &Sample) -> f64 {
        let a = sample.audio.data();
        let audio = self
            .audio_direction
            .iter()
            .map(|&(j, sign)| sign * (a[j] - self.audio_mean[j]) / self.audio_scale[j])
            .sum::<f64>()
            / self.audio_direction.len() as f64;

        let v = sample.video.data();
        let video = self.video_pattern.iter().map(|&(i, sign)| sign * v[i]).sum::<f64>()
            / self.video_pattern.len().max(1) as f64;

        let bits = sample.micro.indicators();
        let micro = self
            .micro_indices
            .iter()
            .map(|&i| if bits[i] { 0.5 } else { -0.5 })
            .sum::<f64>()
            / self.micro_indices.len() as f64;

        let ws = words(&sample.transcript);
        let text = ws
            .iter()
            .map(|w| {
                if self.deceptive_words.contains(w) {
                    0.5
                } else if self.truthful_words.contains(w) {
                    -0.5
                } else {
                    0.0
                }
            })
            .sum::<f64>()
            / ws.len().max(1) as f64;

        audio + video + micro + text
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub dataset: Dataset,
    pub signal: PlantedSignal,
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

fn sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Probability that a label-carrying draw agrees with the label.
fn agreement(strength: f64) -> f64 {
    0.5 + 0.4 * (1.0 - (-strength).exp())
}

/// Generates a dataset from `spec`. Byte-for-byte reproducible for a fixed
/// spec, including the seed.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let st = spec.strength;
    let voxels: usize = spec.video_shape.iter().product();

    // Dataset-wide structure.
    let audio_mean: Vec<f64> = (0..AUDIO_DIM).map(|_| rng.random_range(-5.0..5.0)).collect();
    let audio_scale: Vec<f64> = (0..AUDIO_DIM).map(|_| rng.random_range(0.5..3.0)).collect();
    let mut audio_direction: Vec<(usize, f64)> = sample_indices(&mut rng, AUDIO_DIM, AUDIO_SIGNAL_DIMS)
        .into_iter()
        .map(|j| (j, 0.0))
        .collect();
    audio_direction.sort_unstable_by_key(|&(j, _)| j);
    for d in &mut audio_direction {
        d.1 = sign(&mut rng);
    }

    let mut video_pattern: Vec<(usize, f64)> = sample_indices(&mut rng, voxels, (voxels / 4).max(1))
        .into_iter()
        .map(|i| (i, 0.0))
        .collect();
    video_pattern.sort_unstable_by_key(|&(i, _)| i);
    for p in &mut video_pattern {
        p.1 = sign(&mut rng);
    }

    let mut micro_indices = sample_indices(&mut rng, MICRO_DIM, MICRO_SIGNAL_DIMS).into_vec();
    micro_indices.sort_unstable();

    let half = spec.vocab_size / 2;
    let vocab: Vec<String> = (0..spec.vocab_size).map(|i| format!("w{i:03}")).collect();
    let (deceptive_words, truthful_words) = (vocab[..half].to_vec(), vocab[half..].to_vec());
    let text_axis: Vec<f64> = (0..spec.embedding_dim).map(|_| sign(&mut rng)).collect();
    let mut word_vectors = Vec::with_capacity(spec.vocab_size);
    for (i, w) in vocab.iter().enumerate() {
        let polarity = if i < half { 1.0 } else { -1.0 };
        let v = text_axis
            .iter()
            .map(|u| spec.noise * (normal(&mut rng) + polarity * 0.5 * st.text * u))
            .collect();
        word_vectors.push((w.clone(), v));
    }
    let embeddings = EmbeddingTable::new(word_vectors, spec.embedding_dim)?;

    // Per-subject offsets.
    let subject_audio: Vec<Vec<f64>> = (0..spec.subjects)
        .map(|_| (0..AUDIO_DIM).map(|_| spec.identity * normal(&mut rng)).collect())
        .collect();
    let subject_video: Vec<Vec<f64>> = (0..spec.subjects)
        .map(|_| (0..voxels).map(|_| spec.identity * normal(&mut rng)).collect())
        .collect();

    let micro_agree = agreement(st.micro);
    let word_agree = agreement(st.text);
    let mut samples = Vec::with_capacity(spec.samples);
    for i in 0..spec.samples {
        let subject = i % spec.subjects;
        let round = i / spec.subjects;
        let label = if (round + subject) % 2 == 1 {
            Label::Deceptive
        } else {
            Label::Truthful
        };
        let y = if label.is_deceptive() { 1.0 } else { -1.0 };

        let mut shift = vec![0.0; AUDIO_DIM];
        for &(j, u) in &audio_direction {
            shift[j] = y * 0.5 * st.audio * spec.noise * u;
        }
        let audio: Vec<f64> = (0..AUDIO_DIM)
            .map(|j| {
                let z = subject_audio[subject][j] + spec.noise * normal(&mut rng) + shift[j];
                audio_mean[j] + audio_scale[j] * z
            })
            .collect();

        let mut video: Vec<f64> = (0..voxels)
            .map(|k| subject_video[subject][k] + spec.noise * normal(&mut rng))
            .collect();
        for &(k, u) in &video_pattern {
            video[k] += y * 0.5 * st.visual * spec.noise * u;
        }
        // Stored on disk as f32; round now so a reload is exact.
        let video: Vec<f64> = video.into_iter().map(|v| v as f32 as f64).collect();

        let mut micro = vec![0.0; MICRO_DIM];
        for (k, m) in micro.iter_mut().enumerate() {
            let p = if micro_indices.binary_search(&k).is_ok() {
                0.5 + y * (micro_agree - 0.5)
            } else {
                MICRO_BASE_RATE
            };
            if rng.random::<f64>() < p {
                *m = 1.0;
            }
        }

        let transcript = (0..spec.transcript_words)
            .map(|_| {
                let agrees = rng.random::<f64>() < word_agree;
                let pool = if agrees == label.is_deceptive() {
                    &deceptive_words
                } else {
                    &truthful_words
                };
                pool[rng.random_range(0..pool.len())].as_str()
            })
            .collect::<Vec<_>>()
            .join(" ");

        samples.push(Sample {
            id: format!("s{i:04}"),
            subject: format!("p{subject:02}"),
            label,
            transcript,
            audio: Tensor::vector(audio)?,
            video: Tensor::new(spec.video_shape.to_vec(), video)?,
            micro: validate_micro(&micro)?,
        });
    }

    Ok(SyntheticDataset {
        dataset: Dataset {
            name: spec.name.clone(),
            video_shape: spec.video_shape,
            samples,
            embeddings: Some(embeddings),
        },
        signal: PlantedSignal {
            audio_mean,
            audio_scale,
            audio_direction,
            video_pattern,
            micro_indices,
            deceptive_words,
            truthful_words,
        },
    })
}
