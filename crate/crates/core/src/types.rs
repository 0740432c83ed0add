//! Domain types shared across the toolkit.
//!
//! All of these are plain values: once constructed through their validating
//! constructors they are never mutated in place by library code, so they can
//! be shared freely between threads.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frame-level embeddings for one session, one row per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    session_id: String,
    frames: Array2<f64>,
    frame_period: f64,
    start_time: f64,
}

impl FrameMatrix {
    pub fn new(
        session_id: impl Into<String>,
        frames: Array2<f64>,
        frame_period: f64,
        start_time: f64,
    ) -> Result<Self> {
        let (n, d) = frames.dim();
        if n == 0 || d == 0 {
            return Err(Error::InvalidArgument(format!(
                "frame matrix must be non-empty, got {n}x{d}"
            )));
        }
        if !(frame_period > 0.0 && frame_period.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "frame period must be positive, got {frame_period}"
            )));
        }
        if !start_time.is_finite() {
            return Err(Error::InvalidArgument("start time must be finite".into()));
        }
        if let Some(pos) = frames.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value in frame {} coefficient {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self {
            session_id: session_id.into(),
            frames,
            frame_period,
            start_time,
        })
    }

    pub fn session_id(&self) -> &str {
        &self.session_id
    }

    pub fn frames(&self) -> ArrayView2<'_, f64> {
        self.frames.view()
    }

    pub fn frame_period(&self) -> f64 {
        self.frame_period
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }

    /// Same metadata, new frame values. Used by filters that preserve shape.
    pub(crate) fn with_frames(&self, frames: Array2<f64>) -> Self {
        debug_assert_eq!(frames.dim(), self.frames.dim());
        Self {
            session_id: self.session_id.clone(),
            frames,
            frame_period: self.frame_period,
            start_time: self.start_time,
        }
    }

    /// Inclusive frame index range `[first, last]` covered by a time span.
    ///
    /// `first = floor(start / period)`, `last = ceil(end / period) - 1`, both
    /// relative to `start_time` and clamped to `[0, N)`. A tolerance of 1e-9
    /// frames absorbs decimal round-off such as `2.5 / 0.01 = 250.00000000000003`.
    /// Returns `None` when the span misses every frame.
    pub fn frame_range(&self, start: f64, end: f64) -> Option<(usize, usize)> {
        const EPS: f64 = 1e-9;
        let n = self.n_frames() as f64;
        let s = ((start - self.start_time) / self.frame_period + EPS).floor();
        let e = ((end - self.start_time) / self.frame_period - EPS).ceil() - 1.0;
        let s = s.max(0.0);
        let e = e.min(n - 1.0);
        if e < s || s >= n || e < 0.0 {
            return None;
        }
        Some((s as usize, e as usize))
    }
}

/// One speaker turn in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ref_speaker: Option<String>,
}

impl Segment {
    pub fn new(start: f64, end: f64, ref_speaker: Option<String>) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || start < 0.0 || end <= start {
            return Err(Error::InvalidArgument(format!(
                "segment needs 0 <= start < end, got [{start}, {end}]"
            )));
        }
        Ok(Self {
            start,
            end,
            ref_speaker,
        })
    }

    pub fn labeled(start: f64, end: f64, speaker: &str) -> Result<Self> {
        Self::new(start, end, Some(speaker.to_string()))
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Oracle segmentation of a session: sorted and non-overlapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTable {
    pub session_id: String,
    segments: Vec<Segment>,
}

/// Overlap tolerance when validating tables, in seconds.
const OVERLAP_EPS: f64 = 1e-9;

impl SegmentTable {
    /// Sorts by start time and rejects overlapping segments.
    pub fn new(session_id: impl Into<String>, mut segments: Vec<Segment>) -> Result<Self> {
        segments.sort_by(|a, b| a.start.total_cmp(&b.start).then(a.end.total_cmp(&b.end)));
        for (i, pair) in segments.windows(2).enumerate() {
            if pair[1].start < pair[0].end - OVERLAP_EPS {
                return Err(Error::Overlap {
                    first: i,
                    first_start: pair[0].start,
                    first_end: pair[0].end,
                    second: i + 1,
                    second_start: pair[1].start,
                    second_end: pair[1].end,
                });
            }
        }
        Ok(Self {
            session_id: session_id.into(),
            segments,
        })
    }

    pub fn empty(session_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            segments: Vec::new(),
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }

    /// Sorted, de-duplicated reference speaker labels.
    pub fn speakers(&self) -> Vec<String> {
        let mut labels: Vec<String> = self
            .segments
            .iter()
            .filter_map(|s| s.ref_speaker.clone())
            .collect();
        labels.sort();
        labels.dedup();
        labels
    }

    /// Keeps only the segments for which `keep` is true.
    pub fn filtered(&self, mut keep: impl FnMut(&Segment) -> bool) -> Self {
        Self {
            session_id: self.session_id.clone(),
            segments: self.segments.iter().filter(|s| keep(s)).cloned().collect(),
        }
    }
}

/// One aggregated vector per segment.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentEmbedding {
    pub vector: Array1<f64>,
    pub duration: f64,
    pub segment_index: usize,
    pub ref_speaker: Option<String>,
}

impl SegmentEmbedding {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// Stacks embedding vectors into an `n x d` matrix.
pub fn stack_embeddings(embeddings: &[SegmentEmbedding]) -> Result<Array2<f64>> {
    let Some(first) = embeddings.first() else {
        return Err(Error::NotEnoughSamples {
            msg: "no embeddings to stack".into(),
        });
    };
    let d = first.dim();
    let mut out = Array2::zeros((embeddings.len(), d));
    for (mut row, e) in out.rows_mut().into_iter().zip(embeddings) {
        if e.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: e.dim(),
            });
        }
        row.assign(&e.vector);
    }
    Ok(out)
}

/// How a clustering's initial centroids were chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSource {
    RandomInit,
    PlusplusInit,
    ProfileInit,
    GivenInit,
}

/// A hard clustering: centroids plus one label per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Array2<f64>,
    pub assignments: Vec<usize>,
    pub source: InitSource,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct ClusterModelJson {
    k: usize,
    centroids: Vec<Vec<f64>>,
    assignments: Vec<usize>,
    source: InitSource,
    seed: u64,
}

impl ClusterModel {
    pub fn new(
        centroids: Array2<f64>,
        assignments: Vec<usize>,
        source: InitSource,
        seed: u64,
    ) -> Result<Self> {
        let k = centroids.nrows();
        if k == 0 {
            return Err(Error::InvalidArgument("cluster model needs k >= 1".into()));
        }
        if let Some(&bad) = assignments.iter().find(|&&a| a >= k) {
            return Err(Error::InvalidArgument(format!(
                "assignment {bad} out of range for k = {k}"
            )));
        }
        if centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite centroid".into()));
        }
        Ok(Self {
            k,
            centroids,
            assignments,
            source,
            seed,
        })
    }

    pub fn dim(&self) -> usize {
        self.centroids.ncols()
    }

    /// Member count per cluster.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    pub fn empty_clusters(&self) -> usize {
        self.cluster_sizes().iter().filter(|&&s| s == 0).count()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(ClusterModelJson {
            k: self.k,
            centroids: matrix_to_rows(self.centroids.view()),
            assignments: self.assignments.clone(),
            source: self.source,
            seed: self.seed,
        })
        .expect("cluster model serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let raw: ClusterModelJson = serde_json::from_value(value.clone())?;
        let model = Self::new(
            rows_to_matrix(&raw.centroids)?,
            raw.assignments,
            raw.source,
            raw.seed,
        )?;
        if model.k != raw.k {
            return Err(Error::Format(format!(
                "k = {} but {} centroid rows",
                raw.k, model.k
            )));
        }
        Ok(model)
    }
}

/// Known speakers' centroids, usable as a k-Means initializer.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerProfiles {
    labels: Vec<String>,
    vectors: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct SpeakerProfilesJson {
    labels: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

impl SpeakerProfiles {
    pub fn new(labels: Vec<String>, vectors: Array2<f64>) -> Result<Self> {
        if labels.len() != vectors.nrows() {
            return Err(Error::LengthMismatch {
                what: "profile labels vs vectors",
                expected: vectors.nrows(),
                got: labels.len(),
            });
        }
        let mut sorted = labels.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "duplicate profile label {}",
                w[0]
            )));
        }
        Ok(Self { labels, vectors })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn vectors(&self) -> ArrayView2<'_, f64> {
        self.vectors.view()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn vector(&self, i: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(i)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(SpeakerProfilesJson {
            labels: self.labels.clone(),
            vectors: matrix_to_rows(self.vectors.view()),
        })
        .expect("profiles serialize")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let raw: SpeakerProfilesJson = serde_json::from_value(value.clone())?;
        Self::new(raw.labels, rows_to_matrix(&raw.vectors)?)
    }
}

pub(crate) fn matrix_to_rows(m: ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::Format("ragged matrix rows".into()));
    }
    Array2::from_shape_vec((n, d), rows.concat()).map_err(|e| Error::Format(e.to_string()))
}
