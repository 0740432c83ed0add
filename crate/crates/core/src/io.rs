//! On-disk formats: frame binaries, CSV import, parameter blobs, manifests.
//!
//! Binary containers (frame matrices and model checkpoints) share one layout:
//! a single line of compact JSON terminated by `\n`, followed immediately by
//! row-major little-endian `f32` values.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::FrameMatrix;

/// Header of a frame binary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameHeader {
    pub n_frames: usize,
    pub dim: usize,
    pub frame_period: f64,
    pub start_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
}

/// Encodes a JSON header line plus an `f32` blob.
pub fn encode_blob<H: Serialize>(header: &H, values: impl IntoIterator<Item = f64>) -> Vec<u8> {
    let mut out = serde_json::to_vec(header).expect("header serializes");
    out.push(b'\n');
    for v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

/// Splits a blob into its header and `f32` values widened to `f64`.
pub fn decode_blob<H: DeserializeOwned>(bytes: &[u8]) -> Result<(H, Vec<f64>)> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("missing header line".into()))?;
    let header: H = serde_json::from_slice(&bytes[..nl])?;
    let body = &bytes[nl + 1..];
    if !body.len().is_multiple_of(4) {
        return Err(Error::Format(format!(
            "payload of {} bytes is not a whole number of f32 values",
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Ok((header, values))
}

pub fn encode_frames(frames: &FrameMatrix) -> Vec<u8> {
    let header = FrameHeader {
        n_frames: frames.n_frames(),
        dim: frames.dim(),
        frame_period: frames.frame_period(),
        start_time: frames.start_time(),
        session_id: Some(frames.session_id().to_string()),
    };
    encode_blob(&header, frames.frames().iter().copied())
}

pub fn decode_frames(bytes: &[u8], fallback_id: &str) -> Result<FrameMatrix> {
    let (h, values): (FrameHeader, _) = decode_blob(bytes)?;
    if values.len() != h.n_frames * h.dim {
        return Err(Error::LengthMismatch {
            what: "frame payload",
            expected: h.n_frames * h.dim,
            got: values.len(),
        });
    }
    let m = Array2::from_shape_vec((h.n_frames, h.dim), values)
        .map_err(|e| Error::Format(e.to_string()))?;
    FrameMatrix::new(
        h.session_id.unwrap_or_else(|| fallback_id.to_string()),
        m,
        h.frame_period,
        h.start_time,
    )
}

pub fn write_frames(path: impl AsRef<Path>, frames: &FrameMatrix) -> Result<()> {
    write_bytes(path, &encode_frames(frames))
}

/// Reads the binary frame format, or CSV when the extension is `.csv`
/// (10 ms frames starting at 0).
pub fn read_frames(path: impl AsRef<Path>) -> Result<FrameMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let text = String::from_utf8(bytes).map_err(|e| Error::Format(format!("csv is not utf-8: {e}")))?;
        return parse_frames_csv(&text, &stem, 0.01, 0.0);
    }
    decode_frames(&bytes, &stem)
}

/// Parses comma-separated frames, one frame per line.
///
/// A first line that does not parse as numbers is treated as a header.
pub fn parse_frames_csv(
    text: &str,
    session_id: &str,
    frame_period: f64,
    start_time: f64,
) -> Result<FrameMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => {
                if let Some(first) = rows.first() {
                    if first.len() != row.len() {
                        return Err(Error::Format(format!(
                            "csv line {}: {} columns, expected {}",
                            idx + 1,
                            row.len(),
                            first.len()
                        )));
                    }
                }
                rows.push(row);
            }
            Err(_) if idx == 0 => continue,
            Err(e) => return Err(Error::Format(format!("csv line {}: {e}", idx + 1))),
        }
    }
    let m = crate::types::rows_to_matrix(&rows)?;
    FrameMatrix::new(session_id, m, frame_period, start_time)
}

pub(crate) fn write_bytes(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

/// Applies `key=value` overrides to any serializable settings struct.
/// Dotted keys reach nested fields; values are parsed as JSON, falling back
/// to a plain string, and `none` or `null` clears an optional field.
pub fn apply_overrides<T, S>(base: &T, overrides: &[S]) -> Result<T>
where
    T: Serialize + DeserializeOwned,
    S: AsRef<str>,
{
    let mut root = serde_json::to_value(base)?;
    for item in overrides {
        let item = item.as_ref();
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::InvalidArgument(format!("override {item:?} is not key=value")))?;
        let value = match raw {
            "none" | "null" => serde_json::Value::Null,
            _ => serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string())),
        };
        let mut node = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let obj = node
                .as_object_mut()
                .ok_or_else(|| Error::InvalidArgument(format!("{key}: {part} is not a section")))?;
            if !obj.contains_key(*part) {
                return Err(Error::InvalidArgument(format!("unknown config key {key:?}")));
            }
            if i + 1 == parts.len() {
                obj.insert(part.to_string(), value.clone());
                break;
            }
            node = obj.get_mut(*part).expect("checked");
        }
    }
    serde_json::from_value(root).map_err(|e| Error::InvalidArgument(format!("bad override: {e}")))
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

pub fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// One session of a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub session_id: String,
    pub frames_path: PathBuf,
    pub rttm_path: PathBuf,
    pub num_speakers: usize,
}

/// A list of sessions plus optional provenance of generated suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub sessions: Vec<SessionEntry>,
}

impl Manifest {
    /// Reads a manifest; accepts either `{"sessions": [...]}` or a bare array.
    /// Relative paths are resolved against the manifest's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let value: serde_json::Value = read_json(path)?;
        let mut manifest: Manifest = if value.is_array() {
            Manifest {
                suite: None,
                version: None,
                seed: None,
                sessions: serde_json::from_value(value)?,
            }
        } else {
            serde_json::from_value(value)?
        };
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        for s in &mut manifest.sessions {
            if s.frames_path.is_relative() {
                s.frames_path = base.join(&s.frames_path);
            }
            if s.rttm_path.is_relative() {
                s.rttm_path = base.join(&s.rttm_path);
            }
        }
        Ok(manifest)
    }
}
