//! Embedding preparation: temporal smoothing of frame embeddings, per-segment
//! aggregation and the PCA whitening front-end.

mod aggregate;
mod filter;
mod pca;

pub use aggregate::{
    aggregate, aggregate_mean, aggregate_median, aggregate_table, median, Aggregation,
};
pub use filter::{
    build_filter, smooth_frames, smooth_frames_per_segment, smooth_with_scope, FilterKernel,
    SmoothingScope, DEFAULT_FILTER_ORDER,
};
pub use pca::{
    apply_whitener, fit_pca, fit_pca_whitener, PcaWhitener, DEFAULT_PCA_DIM,
    DEFAULT_PCA_MIN_DURATION,
};
