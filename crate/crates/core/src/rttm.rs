//! RTTM segmentation I/O and collar handling.
//!
//! Only `SPEAKER` records are read; other record types and `#` comments are
//! skipped. Times are written with exactly two decimals using Rust's float
//! formatting, which rounds the exact binary value (so `1.005`, stored as
//! `1.00499999...`, is written `1.00`) and rounds exact ties to even.

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{Segment, SegmentTable};

/// Default collar in seconds: shorter silences count as speech.
pub const DEFAULT_COLLAR: f64 = 0.25;

/// Parses RTTM text into a sorted, validated table.
///
/// Every `SPEAKER` line must name the same file id, which becomes the table's
/// session id. `session_hint` is used when the text has no records.
pub fn parse_rttm(text: &str, session_hint: &str) -> Result<SegmentTable> {
    let mut session: Option<String> = None;
    let mut segments = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(";;") {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields[0] != "SPEAKER" {
            continue;
        }
        if fields.len() < 8 {
            return Err(Error::RttmParse {
                line: line_no,
                msg: format!("expected at least 8 fields, found {}", fields.len()),
            });
        }
        let parse_time = |s: &str, name: &str| -> Result<f64> {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::RttmParse {
                    line: line_no,
                    msg: format!("bad {name} '{s}'"),
                })
        };
        let tbeg = parse_time(fields[3], "tbeg")?;
        let tdur = parse_time(fields[4], "tdur")?;
        let seg = Segment::new(tbeg, tbeg + tdur, Some(fields[7].to_string())).map_err(|e| {
            Error::RttmParse {
                line: line_no,
                msg: e.to_string(),
            }
        })?;
        match &session {
            None => session = Some(fields[1].to_string()),
            Some(s) if s != fields[1] => {
                return Err(Error::RttmParse {
                    line: line_no,
                    msg: format!("file id '{}' differs from '{s}'", fields[1]),
                })
            }
            Some(_) => {}
        }
        segments.push(seg);
    }
    SegmentTable::new(session.unwrap_or_else(|| session_hint.to_string()), segments)
}

/// Reads an RTTM stream.
pub fn read_rttm(mut reader: impl Read, session_hint: &str) -> Result<SegmentTable> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::io("<stream>", e))?;
    parse_rttm(&text, session_hint)
}

/// Reads an RTTM file; the file stem is the fallback session id.
pub fn read_rttm_file(path: impl AsRef<Path>) -> Result<SegmentTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let hint = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_rttm(&text, &hint)
}

/// Renders one `SPEAKER` line per segment with the given labels.
pub fn write_rttm<S: AsRef<str>>(table: &SegmentTable, labels: &[S]) -> Result<String> {
    if labels.len() != table.len() {
        return Err(Error::LengthMismatch {
            what: "rttm labels",
            expected: table.len(),
            got: labels.len(),
        });
    }
    let mut out = String::new();
    for (seg, label) in table.segments().iter().zip(labels) {
        out.push_str(&format!(
            "SPEAKER {} 1 {:.2} {:.2} <NA> <NA> {} <NA> <NA>\n",
            table.session_id,
            seg.start,
            seg.duration(),
            label.as_ref()
        ));
    }
    Ok(out)
}

/// Writes the table using its own reference labels (`<NA>` where absent).
pub fn write_reference_rttm(table: &SegmentTable) -> String {
    let labels: Vec<&str> = table
        .segments()
        .iter()
        .map(|s| s.ref_speaker.as_deref().unwrap_or("<NA>"))
        .collect();
    write_rttm(table, &labels).expect("label count matches")
}

/// Treats silences shorter than `collar` as speech.
///
/// A short gap between two turns of the same speaker is absorbed by merging
/// the turns; a short gap between different speakers is split at its
/// midpoint. Zero-length gaps between different speakers are left alone, so
/// applying the function twice gives the same table.
pub fn merge_short_silences(table: &SegmentTable, collar: f64) -> Result<SegmentTable> {
    if !(collar >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "collar must be >= 0, got {collar}"
        )));
    }
    let mut out: Vec<Segment> = Vec::with_capacity(table.len());
    for seg in table.segments() {
        let mut seg = seg.clone();
        if let Some(prev) = out.last_mut() {
            let gap = seg.start - prev.end;
            if gap < collar {
                if prev.ref_speaker == seg.ref_speaker {
                    prev.end = prev.end.max(seg.end);
                    continue;
                } else if gap > 0.0 {
                    let mid = 0.5 * (prev.end + seg.start);
                    prev.end = mid;
                    seg.start = mid;
                }
            }
        }
        out.push(seg);
    }
    SegmentTable::new(table.session_id.clone(), out)
}
