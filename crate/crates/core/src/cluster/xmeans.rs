use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::bic::bic_score;
use super::kmeans::{kmeans, KMeansConfig, KMeansInit, KMeansParams};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::types::ClusterModel;

pub const DEFAULT_K_MAX: usize = 16;

/// Which BIC decides whether a cluster is split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCriterion {
    /// Child vs parent BIC on the cluster's own samples.
    #[default]
    Local,
    /// BIC of the whole clustering with and without the split.
    Global,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct XMeansConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub criterion: SplitCriterion,
    pub kmeans: KMeansParams,
}

impl Default for XMeansConfig {
    fn default() -> Self {
        Self {
            k_min: 1,
            k_max: DEFAULT_K_MAX,
            criterion: SplitCriterion::Local,
            kmeans: KMeansParams::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct XMeansFit {
    pub model: ClusterModel,
    /// Number of improve-structure rounds that accepted at least one split.
    pub rounds: usize,
}

/// k-Means with BIC-driven cluster splitting.
///
/// Starts from k-Means at `k_min`. Each round tries a local 2-means split of
/// every cluster and keeps the splits that raise the BIC, then re-runs
/// k-Means on all samples from the enlarged centroid set. Stops when a round
/// accepts nothing or `k_max` is reached.
pub fn xmeans(x: ArrayView2<'_, f64>, cfg: &XMeansConfig, seed: u64) -> Result<XMeansFit> {
    let n = x.nrows();
    if cfg.k_min == 0 || cfg.k_min > cfg.k_max || cfg.k_max > n {
        return Err(Error::InvalidArgument(format!(
            "x-means needs 1 <= k_min <= k_max <= n, got {} / {} / {n}",
            cfg.k_min, cfg.k_max
        )));
    }
    let start = kmeans(x, &cfg.kmeans.config(cfg.k_min, seed))?;
    let source = start.model.source;
    let mut model = start.model;
    let mut rounds = 0;
    while model.k < cfg.k_max {
        let mut next: Vec<Array2<f64>> = Vec::new();
        let mut k_after = model.k;
        for j in 0..model.k {
            let members: Vec<usize> = (0..n).filter(|&i| model.assignments[i] == j).collect();
            let centroid = model.centroids.row(j).insert_axis(Axis(0)).to_owned();
            if k_after < cfg.k_max && members.len() >= 2 {
                let child_seed = derive_seed(seed, ((rounds as u64) << 32) | j as u64);
                if let Some(children) = try_split(x, &model, j, &members, cfg, child_seed)? {
                    next.push(children);
                    k_after += 1;
                    continue;
                }
            }
            next.push(centroid);
        }
        if k_after == model.k {
            break;
        }
        rounds += 1;
        let views: Vec<_> = next.iter().map(|a| a.view()).collect();
        let centroids = ndarray::concatenate(Axis(0), &views).expect("same width");
        let cfg_refit = KMeansConfig {
            init: KMeansInit::Given(centroids),
            ..cfg.kmeans.config(k_after, seed)
        };
        let refit = kmeans(x, &cfg_refit)?;
        model = ClusterModel { source, ..refit.model };
    }
    Ok(XMeansFit { model, rounds })
}

/// Returns the two child centroids if splitting cluster `j` is accepted.
fn try_split(
    x: ArrayView2<'_, f64>,
    model: &ClusterModel,
    j: usize,
    members: &[usize],
    cfg: &XMeansConfig,
    seed: u64,
) -> Result<Option<Array2<f64>>> {
    let sub = x.select(Axis(0), members);
    let mean = sub.mean_axis(Axis(0)).expect("non-empty").insert_axis(Axis(0));
    let child = kmeans(sub.view(), &cfg.kmeans.config(2, seed))?;
    let accept = match cfg.criterion {
        SplitCriterion::Local => {
            let parent = bic_score(sub.view(), mean.view(), &vec![0; members.len()])?;
            let split = bic_score(sub.view(), child.model.centroids.view(), &child.model.assignments)?;
            split.bic > parent.bic
        }
        SplitCriterion::Global => {
            let current = bic_score(x, model.centroids.view(), &model.assignments)?;
            let k = model.k;
            let mut centroids = model.centroids.clone();
            centroids.row_mut(j).assign(&child.model.centroids.row(0));
            let centroids = ndarray::concatenate(
                Axis(0),
                &[centroids.view(), child.model.centroids.slice(ndarray::s![1..2, ..])],
            )
            .expect("same width");
            let mut labels = model.assignments.clone();
            for (&i, &c) in members.iter().zip(&child.model.assignments) {
                labels[i] = if c == 0 { j } else { k };
            }
            bic_score(x, centroids.view(), &labels)?.bic > current.bic
        }
    };
    Ok(accept.then_some(child.model.centroids))
}
