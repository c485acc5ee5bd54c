//! Dataset manifests: JSON Lines, a `dataset` header record followed by one
//! `sample` record per video. File paths are relative to the manifest.
//!
//! ```text
//! {"kind":"dataset","name":"trial","audio_dim":6373,"micro_dim":39,"video_shape":[3,16,64,64],"embeddings":"embeddings.txt"}
//! {"kind":"sample","id":"s000","subject":"p01","label":"deceptive","transcript":"I never saw him.","audio":"audio/s000.csv","video":"video/s000.bin","micro":"micro/s000.csv"}
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::formats::{read_audio_csv, read_micro_csv, read_video, write_audio_csv, write_micro_csv, write_video};
use super::{Dataset, EmbeddingTable, Label, Sample};
use crate::extractors::{validate_micro, AUDIO_DIM, MICRO_DIM};
use crate::{Error, Result, Tensor};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestHeader {
    pub name: String,
    pub audio_dim: usize,
    pub micro_dim: usize,
    pub video_shape: [usize; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub id: String,
    pub subject: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript_path: Option<String>,
    pub audio: String,
    pub video: String,
    pub micro: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Line {
    Dataset(ManifestHeader),
    Sample(SampleRecord),
}

/// Parses and validates a manifest, loading every referenced file.
pub fn load_manifest(path: &Path) -> Result<Dataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut header: Option<ManifestHeader> = None;
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line: Line = serde_json::from_str(raw).map_err(|e| parse_err(i + 1, e.to_string()))?;
        match (line, &header) {
            (Line::Dataset(h), None) => header = Some(h),
            (Line::Dataset(_), Some(_)) => return Err(parse_err(i + 1, "second dataset record".into())),
            (Line::Sample(_), None) => {
                return Err(parse_err(i + 1, "sample before the dataset record".into()))
            }
            (Line::Sample(r), Some(_)) => records.push((i + 1, r)),
        }
    }
    let header = header.ok_or_else(|| parse_err(1, "missing dataset record".into()))?;
    if header.audio_dim != AUDIO_DIM {
        return Err(Error::Data(format!(
            "manifest declares audio_dim {}, expected {AUDIO_DIM}",
            header.audio_dim
        )));
    }
    if header.micro_dim != MICRO_DIM {
        return Err(Error::Data(format!(
            "manifest declares micro_dim {}, expected {MICRO_DIM}",
            header.micro_dim
        )));
    }

    let mut seen = HashSet::new();
    let mut samples = Vec::with_capacity(records.len());
    for (line, rec) in records {
        if !seen.insert(rec.id.clone()) {
            return Err(Error::DuplicateSample(rec.id));
        }
        if rec.subject.trim().is_empty() {
            return Err(parse_err(line, format!("sample `{}` has an empty subject", rec.id)));
        }
        samples.push(load_sample(base, &header, rec)?);
    }
    if samples.is_empty() {
        return Err(Error::Data(format!("{}: no samples", path.display())));
    }
    let embeddings = header
        .embeddings
        .as_ref()
        .map(|p| EmbeddingTable::load(&base.join(p)))
        .transpose()?;
    Ok(Dataset {
        name: header.name,
        video_shape: header.video_shape,
        samples,
        embeddings,
    })
}

fn load_sample(base: &Path, header: &ManifestHeader, rec: SampleRecord) -> Result<Sample> {
    let invalid = |msg: String| Error::InvalidSample {
        sample: rec.id.clone(),
        msg,
    };
    let transcript = match (&rec.transcript, &rec.transcript_path) {
        (Some(t), None) => t.clone(),
        (None, Some(p)) => {
            let p = base.join(p);
            fs::read_to_string(&p).map_err(|e| Error::io(p, e))?
        }
        _ => return Err(invalid("needs exactly one of transcript, transcript_path".into())),
    };

    let audio = read_audio_csv(&base.join(&rec.audio))?;
    if audio.len() != AUDIO_DIM {
        return Err(invalid(format!(
            "audio vector has {} values, expected {AUDIO_DIM}",
            audio.len()
        )));
    }
    let micro = validate_micro(&read_micro_csv(&base.join(&rec.micro))?)
        .map_err(|e| invalid(e.to_string()))?;
    let video = read_video(&base.join(&rec.video))?;
    if video.shape() != header.video_shape {
        return Err(invalid(format!(
            "video shape {:?}, dataset declares {:?}",
            video.shape(),
            header.video_shape
        )));
    }
    Ok(Sample {
        id: rec.id,
        subject: rec.subject,
        label: rec.label,
        transcript,
        audio: Tensor::vector(audio)?,
        video,
        micro,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Writes `dataset` under `dir` as a manifest plus per-modality files and
/// returns the manifest path. Video values are stored as `f32`.
pub fn write_dataset(dataset: &Dataset, dir: &Path) -> Result<PathBuf> {
    for sub in ["audio", "video", "micro"] {
        create_dir(&dir.join(sub))?;
    }
    let embeddings = match &dataset.embeddings {
        Some(table) => {
            table.write(&dir.join("embeddings.txt"))?;
            Some("embeddings.txt".to_string())
        }
        None => None,
    };
    let header = ManifestHeader {
        name: dataset.name.clone(),
        audio_dim: AUDIO_DIM,
        micro_dim: MICRO_DIM,
        video_shape: dataset.video_shape,
        embeddings,
    };
    let mut out = serde_json::to_string(&Line::Dataset(header)).expect("header serialises");
    out.push('\n');
    for s in &dataset.samples {
        let rec = SampleRecord {
            id: s.id.clone(),
            subject: s.subject.clone(),
            label: s.label,
            transcript: Some(s.transcript.clone()),
            transcript_path: None,
            audio: format!("audio/{}.csv", s.id),
            video: format!("video/{}.bin", s.id),
            micro: format!("micro/{}.csv", s.id),
        };
        write_audio_csv(&dir.join(&rec.audio), s.audio.data())?;
        write_video(&dir.join(&rec.video), &s.video)?;
        write_micro_csv(&dir.join(&rec.micro), s.micro.indicators())?;
        out.push_str(&serde_json::to_string(&Line::Sample(rec)).expect("record serialises"));
        out.push('\n');
    }
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, out).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
