//! Speaker clustering over oracle segmentations.
//!
//! Frames are smoothed and pooled per segment, clustered with k-Means,
//! x-Means, spectral clustering or deep embedded clustering, and scored by
//! matching clusters to reference speakers. The guide in `book/` walks
//! through each stage.

// NaN has to fail the range checks, which `!(x > 0.0)` does.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod dec;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod prep;
pub mod rng;
pub mod rttm;
pub mod scoring;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    ClusterModel, FrameMatrix, InitSource, Segment, SegmentEmbedding, SegmentTable,
    SpeakerProfiles,
};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/sessions.md")]
    mod sessions {}
    #[doc = include_str!("../../../book/src/preprocessing.md")]
    mod preprocessing {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/dec.md")]
    mod dec {}
    #[doc = include_str!("../../../book/src/scoring.md")]
    mod scoring {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/formats.md")]
    mod formats {}
}
