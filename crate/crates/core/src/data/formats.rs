//! Byte layouts of the per-modality files.
//!
//! * audio: one CSV row of comma-separated reals
//! * micro-expressions: one CSV row of `0`/`1` values
//! * video: 16-byte header of four little-endian `u32` extents `c, f, h, w`,
//!   then `c·f·h·w` little-endian `f32` values in row-major order

use std::fs;
use std::path::Path;

use crate::{Error, Result, Tensor};

const VIDEO_HEADER: usize = 16;

fn parse_row(path: &Path, text: &str) -> Result<Vec<f64>> {
    let mut rows = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (line, row) = rows.next().ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line: 1,
        msg: "empty file".into(),
    })?;
    if let Some((extra, _)) = rows.next() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: extra + 1,
            msg: "expected a single row".into(),
        });
    }
    row.split(',')
        .enumerate()
        .map(|(col, field)| {
            let v: f64 = field.trim().parse().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: line + 1,
                msg: format!("column {}: `{}`: {e}", col + 1, field.trim()),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line + 1,
                    msg: format!("column {}: non-finite value", col + 1),
                })
            }
        })
        .collect()
}

fn join_row(values: impl Iterator<Item = String>) -> String {
    let mut s = values.collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

pub fn read_audio_csv(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_row(path, &text)
}

pub fn write_audio_csv(path: &Path, values: &[f64]) -> Result<()> {
    fs::write(path, join_row(values.iter().map(f64::to_string))).map_err(|e| Error::io(path, e))
}

pub fn read_micro_csv(path: &Path) -> Result<Vec<f64>> {
    read_audio_csv(path)
}

pub fn write_micro_csv(path: &Path, bits: &[bool]) -> Result<()> {
    let row = join_row(bits.iter().map(|&b| if b { "1" } else { "0" }.to_string()));
    fs::write(path, row).map_err(|e| Error::io(path, e))
}

pub fn read_video(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        msg,
    };
    if bytes.len() < VIDEO_HEADER {
        return Err(bad(format!("{} bytes is shorter than the video header", bytes.len())));
    }
    let extents: Vec<usize> = bytes[..VIDEO_HEADER]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let count: usize = extents.iter().product();
    let body = &bytes[VIDEO_HEADER..];
    if count == 0 || body.len() != count * 4 {
        return Err(bad(format!(
            "header {extents:?} needs {} payload bytes, found {}",
            count * 4,
            body.len()
        )));
    }
    let data: Vec<f64> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(bad("non-finite voxel".into()));
    }
    Tensor::new(extents, data)
}

/// Writes a rank-4 tensor; values are stored as `f32`.
pub fn write_video(path: &Path, video: &Tensor) -> Result<()> {
    if video.rank() != 4 {
        return Err(Error::invalid(
            "write_video",
            format!("expected rank 4, got {:?}", video.shape()),
        ));
    }
    let mut bytes = Vec::with_capacity(VIDEO_HEADER + video.len() * 4);
    for &d in video.shape() {
        let d = u32::try_from(d).map_err(|_| Error::invalid("write_video", "extent exceeds u32"))?;
        bytes.extend_from_slice(&d.to_le_bytes());
    }
    for &v in video.data() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
