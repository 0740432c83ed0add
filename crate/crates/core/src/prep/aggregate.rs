use ndarray::{Array1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{FrameMatrix, Segment, SegmentEmbedding, SegmentTable};

/// How frames inside a segment are reduced to one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Median,
    Mean,
}

fn segment_frames<'a>(
    frames: &'a FrameMatrix,
    seg: &Segment,
    index: usize,
) -> Result<ArrayView2<'a, f64>> {
    let (s, e) = frames
        .frame_range(seg.start, seg.end)
        .ok_or(Error::EmptySegment {
            index,
            start: seg.start,
            end: seg.end,
        })?;
    Ok(frames.frames().slice_move(ndarray::s![s..=e, ..]))
}

/// Median of a sample; even counts average the two central order statistics.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let n = values.len();
    let mid = n / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Per-coefficient median over the segment's frames.
pub fn aggregate_median(
    frames: &FrameMatrix,
    seg: &Segment,
    index: usize,
) -> Result<SegmentEmbedding> {
    let block = segment_frames(frames, seg, index)?;
    let mut scratch = Vec::with_capacity(block.nrows());
    let vector: Array1<f64> = block
        .axis_iter(Axis(1))
        .map(|col| {
            scratch.clear();
            scratch.extend(col.iter().copied());
            median(&mut scratch)
        })
        .collect();
    Ok(SegmentEmbedding {
        vector,
        duration: seg.duration(),
        segment_index: index,
        ref_speaker: seg.ref_speaker.clone(),
    })
}

/// Per-coefficient arithmetic mean over the segment's frames.
pub fn aggregate_mean(frames: &FrameMatrix, seg: &Segment, index: usize) -> Result<SegmentEmbedding> {
    let block = segment_frames(frames, seg, index)?;
    let vector = block.mean_axis(Axis(0)).expect("block is non-empty");
    Ok(SegmentEmbedding {
        vector,
        duration: seg.duration(),
        segment_index: index,
        ref_speaker: seg.ref_speaker.clone(),
    })
}

pub fn aggregate(
    frames: &FrameMatrix,
    seg: &Segment,
    index: usize,
    how: Aggregation,
) -> Result<SegmentEmbedding> {
    match how {
        Aggregation::Median => aggregate_median(frames, seg, index),
        Aggregation::Mean => aggregate_mean(frames, seg, index),
    }
}

/// One embedding per segment of the table, in table order.
pub fn aggregate_table(
    frames: &FrameMatrix,
    table: &SegmentTable,
    how: Aggregation,
) -> Result<Vec<SegmentEmbedding>> {
    table
        .segments()
        .iter()
        .enumerate()
        .map(|(i, seg)| aggregate(frames, seg, i, how))
        .collect()
}
