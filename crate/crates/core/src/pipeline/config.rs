use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::cluster::{KMeansParams, SplitCriterion, DEFAULT_K_MAX};
use crate::dec::DecConfig;
use crate::error::{Error, Result};
use crate::prep::{Aggregation, SmoothingScope, DEFAULT_FILTER_ORDER, DEFAULT_PCA_DIM, DEFAULT_PCA_MIN_DURATION};
use crate::rttm::DEFAULT_COLLAR;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Kmeans,
    Spectral,
    Xmeans,
    DecOriginal,
    DecImproved,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Kmeans,
        Algorithm::Spectral,
        Algorithm::Xmeans,
        Algorithm::DecOriginal,
        Algorithm::DecImproved,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Kmeans => "kmeans",
            Algorithm::Spectral => "spectral",
            Algorithm::Xmeans => "xmeans",
            Algorithm::DecOriginal => "dec_original",
            Algorithm::DecImproved => "dec_improved",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm {s:?}")))
    }

    /// Whether the algorithm clusters PCA features rather than raw embeddings.
    pub fn uses_pca(self) -> bool {
        matches!(self, Algorithm::Kmeans | Algorithm::Xmeans)
    }
}

/// k-Means initialization in the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    #[default]
    Plusplus,
    Random,
    /// Speaker profiles from `profiles_path` or from the first session.
    Profiles,
}

/// Everything that determines a pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Binomial smoothing order; `None` disables smoothing.
    pub filter_order: Option<usize>,
    pub smoothing_scope: SmoothingScope,
    pub aggregation: Aggregation,
    /// Silences up to this long are bridged before clustering, seconds.
    pub collar: f64,
    /// Segments no longer than this are dropped from clustering and scoring.
    pub min_duration: f64,
    /// Output dimension of PCA; 0 disables it.
    pub pca_dim: usize,
    /// PCA is fitted on segments at least this long.
    pub pca_min_duration: f64,
    /// k-Means centroids are fitted on segments longer than this, then all
    /// segments are assigned to the nearest centroid.
    pub fit_min_duration: f64,
    pub algorithm: Algorithm,
    /// Number of clusters; the manifest's speaker count when absent.
    pub k: Option<usize>,
    pub k_min: usize,
    pub k_max: usize,
    pub split_criterion: SplitCriterion,
    /// Whiten x-Means features too; by default they are only projected.
    pub xmeans_whiten: bool,
    pub init: InitMethod,
    pub kmeans: KMeansParams,
    pub dec: DecConfig,
    pub profiles_path: Option<PathBuf>,
    /// Autoencoder checkpoint that replaces DEC pretraining.
    pub pretrained_path: Option<PathBuf>,
    /// Derive profiles from the first session's clustering and use them to
    /// initialize the others.
    pub profiles_from_first: bool,
    /// Parallel session workers.
    pub workers: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            filter_order: Some(DEFAULT_FILTER_ORDER),
            smoothing_scope: SmoothingScope::Session,
            aggregation: Aggregation::Median,
            collar: DEFAULT_COLLAR,
            min_duration: 0.0,
            pca_dim: DEFAULT_PCA_DIM,
            pca_min_duration: DEFAULT_PCA_MIN_DURATION,
            fit_min_duration: 0.0,
            algorithm: Algorithm::Kmeans,
            k: None,
            k_min: 1,
            k_max: DEFAULT_K_MAX,
            split_criterion: SplitCriterion::Local,
            xmeans_whiten: false,
            init: InitMethod::Plusplus,
            kmeans: KMeansParams::default(),
            dec: DecConfig::default(),
            profiles_path: None,
            pretrained_path: None,
            profiles_from_first: false,
            workers: 1,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.k == Some(0) {
            return bad("k must be positive");
        }
        if self.algorithm == Algorithm::Xmeans && (self.k_min == 0 || self.k_min > self.k_max) {
            return bad("x-means needs 1 <= k_min <= k_max");
        }
        if self.init == InitMethod::Profiles && self.profiles_path.is_none() && !self.profiles_from_first {
            return bad("init = profiles needs profiles_path or profiles_from_first");
        }
        if self.collar < 0.0 || self.min_duration < 0.0 {
            return bad("collar and min_duration must be non-negative");
        }
        Ok(())
    }

    /// Settings for the DEC variant picked by `algorithm`.
    pub fn dec_config(&self) -> DecConfig {
        match self.algorithm {
            Algorithm::DecOriginal => DecConfig {
                weights: crate::dec::LossWeights::ORIGINAL,
                recalib_period: 0,
                ..self.dec.clone()
            },
            _ => self.dec.clone(),
        }
    }

    /// Applies `key=value` overrides; dotted keys reach nested settings and
    /// values are parsed as JSON, falling back to a plain string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        crate::io::apply_overrides(self, overrides)
    }
}
