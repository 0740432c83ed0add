use std::f64::consts::PI;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::kmeans::sq_dist;
use crate::error::{Error, Result};

/// Floor applied to the pooled variance of a degenerate subset.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Penalized log-likelihood of one candidate model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BicReport {
    pub model_id: String,
    pub log_likelihood: f64,
    pub n_params: usize,
    pub n_samples: usize,
    pub bic: f64,
    /// Set when the variance estimate had to be floored.
    pub variance_floored: bool,
}

impl BicReport {
    fn new(model_id: String, log_likelihood: f64, n_params: usize, n_samples: usize, floored: bool) -> Self {
        let bic = log_likelihood - 0.5 * n_params as f64 * (n_samples as f64).ln();
        Self {
            model_id,
            log_likelihood,
            n_params,
            n_samples,
            bic,
            variance_floored: floored,
        }
    }
}

/// Scores a hard clustering as a spherical Gaussian mixture.
///
/// All components share one variance, estimated by maximum likelihood over
/// every coordinate of every sample; mixing weights are the cluster
/// fractions. Free parameters: `k * d` means, `k - 1` weights and the shared
/// variance. Uses the natural logarithm.
pub fn bic_score(
    x: ArrayView2<'_, f64>,
    centroids: ArrayView2<'_, f64>,
    labels: &[usize],
) -> Result<BicReport> {
    let (n, d) = x.dim();
    let k = centroids.nrows();
    if n == 0 {
        return Err(Error::NotEnoughSamples {
            msg: "bic of an empty subset".into(),
        });
    }
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            what: "bic labels",
            expected: n,
            got: labels.len(),
        });
    }
    if centroids.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: centroids.ncols(),
        });
    }
    let mut counts = vec![0usize; k];
    let mut sse = 0.0;
    for (r, &j) in x.rows().into_iter().zip(labels) {
        if j >= k {
            return Err(Error::InvalidArgument(format!("label {j} with k = {k}")));
        }
        counts[j] += 1;
        sse += sq_dist(r, centroids.row(j));
    }
    let nf = n as f64;
    let df = d as f64;
    let mut variance = sse / (nf * df);
    let floored = !(variance > VARIANCE_FLOOR);
    if floored {
        variance = VARIANCE_FLOOR;
    }
    let mixing: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64 * (c as f64 / nf).ln())
        .sum();
    let ll = mixing - 0.5 * nf * df * (2.0 * PI * variance).ln() - sse / (2.0 * variance);
    let n_params = k * d + (k - 1) + 1;
    Ok(BicReport::new(format!("k={k}"), ll, n_params, n, floored))
}
