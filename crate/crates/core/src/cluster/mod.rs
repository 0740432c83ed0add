//! Classic clustering baselines: Lloyd k-Means with optional speaker-profile
//! initialization, spectral clustering on a cosine affinity graph, and
//! x-Means with BIC-driven splitting.

mod bic;
mod kmeans;
mod spectral;
mod xmeans;

pub use bic::{bic_score, BicReport, VARIANCE_FLOOR};
pub use kmeans::{
    assign_to_centroids, kmeans, kmeans_objective, KMeansConfig, KMeansFit, KMeansInit,
    KMeansParams, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
pub use spectral::{
    cosine_similarity, spectral_cluster, spectral_cluster_affinity, SimilarityMatrix, SpectralFit,
};
pub use xmeans::{xmeans, SplitCriterion, XMeansConfig, XMeansFit, DEFAULT_K_MAX};

