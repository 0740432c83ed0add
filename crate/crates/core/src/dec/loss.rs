use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::assign::{argmax_rows, kernel_rows, sharpen, sq_distances, Exponent};
use super::network::{AutoencoderParams, Gradients};
use crate::error::{Error, Result};

/// Weights of the clustering, reconstruction, uniformity and centroid-distance
/// terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl LossWeights {
    pub const IMPROVED: Self = Self {
        alpha: 0.1,
        beta: 1.0,
        gamma: 10.0,
        delta: 1.0,
    };
    pub const ORIGINAL: Self = Self {
        alpha: 1.0,
        beta: 0.0,
        gamma: 0.0,
        delta: 0.0,
    };
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::IMPROVED
    }
}

/// Per-sample loss terms and their weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_c: f64,
    pub l_r: f64,
    pub l_u: f64,
    pub l_mse: f64,
    pub total: f64,
    pub weights: LossWeights,
}

impl LossBreakdown {
    pub fn new(l_c: f64, l_r: f64, l_u: f64, l_mse: f64, weights: LossWeights) -> Self {
        let total = weights.alpha * l_c + weights.beta * l_r + weights.gamma * l_u + weights.delta * l_mse;
        Self {
            l_c,
            l_r,
            l_u,
            l_mse,
            total,
            weights,
        }
    }

    pub fn is_finite(&self) -> bool {
        [self.l_c, self.l_r, self.l_u, self.l_mse, self.total]
            .iter()
            .all(|v| v.is_finite())
    }

    fn check(self) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(Error::InvalidArgument(format!("non-finite loss {self:?}")))
        }
    }
}

/// `sum p ln(p / q) / n`, with `0 ln 0 = 0`.
pub fn kl_rows(p: ArrayView2<'_, f64>, q: ArrayView2<'_, f64>) -> f64 {
    let s: f64 = p
        .iter()
        .zip(q.iter())
        .filter(|(&pv, _)| pv > 0.0)
        .map(|(&pv, &qv)| pv * (pv / qv).ln())
        .sum();
    s / p.nrows() as f64
}

/// `KL(p_i || uniform)` averaged over rows.
pub fn kl_uniform(p: ArrayView2<'_, f64>) -> f64 {
    let k = p.ncols() as f64;
    let s: f64 = p.iter().filter(|&&v| v > 0.0).map(|&v| v * (v * k).ln()).sum();
    s / p.nrows() as f64
}

/// Mean squared latent distance to the most probable centroid.
pub fn centroid_mse(
    z: ArrayView2<'_, f64>,
    centroids: ArrayView2<'_, f64>,
    q: ArrayView2<'_, f64>,
) -> f64 {
    let labels = argmax_rows(q);
    let s: f64 = z
        .rows()
        .into_iter()
        .zip(&labels)
        .map(|(r, &c)| {
            r.iter()
                .zip(centroids.row(c).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum();
    s / z.nrows() as f64
}

pub fn reconstruction_mse(x: ArrayView2<'_, f64>, out: ArrayView2<'_, f64>) -> f64 {
    let s: f64 = x.iter().zip(out.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    s / x.nrows() as f64
}

/// Loss terms for given inputs, reconstructions, codes, centroids, `q` and `p`.
pub fn breakdown(
    x: ArrayView2<'_, f64>,
    out: ArrayView2<'_, f64>,
    z: ArrayView2<'_, f64>,
    centroids: ArrayView2<'_, f64>,
    q: ArrayView2<'_, f64>,
    p: ArrayView2<'_, f64>,
    weights: LossWeights,
) -> Result<LossBreakdown> {
    if q.dim() != p.dim() || q.nrows() != z.nrows() || x.dim() != out.dim() {
        return Err(Error::InvalidArgument("inconsistent loss inputs".into()));
    }
    LossBreakdown::new(
        kl_rows(p, q),
        reconstruction_mse(x, out),
        kl_uniform(p),
        centroid_mse(z, centroids, q),
        weights,
    )
    .check()
}

/// Everything a minibatch objective needs besides the parameters.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Objective<'a> {
    pub x: ArrayView2<'a, f64>,
    /// Targets for the rows of `x`, held fixed.
    pub p: ArrayView2<'a, f64>,
    pub a: f64,
    pub exponent: Exponent,
    pub weights: LossWeights,
    /// Differentiate the uniformity term through the sharpened targets of
    /// the batch; when false that term is a constant.
    pub live_uniform: bool,
}

pub(crate) struct Evaluated {
    pub value: f64,
    pub grads: Gradients,
    pub d_centroids: Array2<f64>,
}

/// Batch objective and its gradient w.r.t. network parameters and centroids.
pub(crate) fn evaluate(
    params: &AutoencoderParams,
    centroids: ArrayView2<'_, f64>,
    obj: &Objective<'_>,
) -> Result<Evaluated> {
    let Objective {
        x,
        p,
        a,
        exponent,
        weights: w,
        live_uniform,
    } = *obj;
    let cache = params.forward_cached(x, 0.0, 0)?;
    let z = cache.code();
    let out = cache.output();
    let (m, k) = p.dim();
    let mf = m as f64;
    let e = exponent.value(a);
    let d2 = sq_distances(z.view(), centroids);
    let q = kernel_rows(&d2, a, e);

    let l_c = kl_rows(p, q.view());
    let l_r = reconstruction_mse(x, out.view());
    let labels = argmax_rows(q.view());
    let l_mse = centroid_mse(z.view(), centroids, q.view());

    // dL/dlog w, w the unnormalized kernel
    let mut g = (&q - &p) * (w.alpha / mf);
    let l_u = if live_uniform {
        let f: Vec<f64> = q.sum_axis(Axis(0)).iter().map(|&v| v.max(f64::MIN_POSITIVE)).collect();
        let pu = sharpen(q.view(), &f);
        let l_u = kl_uniform(pu.view());
        if w.gamma != 0.0 {
            g += &(uniform_log_kernel_grad(q.view(), pu.view(), &f) * w.gamma);
        }
        l_u
    } else {
        kl_uniform(p)
    };
    let value = LossBreakdown::new(l_c, l_r, l_u, l_mse, w).check()?.total;

    let mut gd = g;
    gd.zip_mut_with(&d2, |v, &d| *v *= -e / (a + d));
    let row = gd.sum_axis(Axis(1));
    let col = gd.sum_axis(Axis(0));
    let mut d_z = z * &row.insert_axis(Axis(1));
    d_z -= &gd.dot(&centroids);
    d_z *= 2.0;
    let mut d_mu = centroids.to_owned() * &col.insert_axis(Axis(1));
    d_mu -= &gd.t().dot(z);
    d_mu *= 2.0;
    if w.delta != 0.0 {
        let s = 2.0 * w.delta / mf;
        for (i, &c) in labels.iter().enumerate() {
            for t in 0..z.ncols() {
                let diff = s * (z[[i, t]] - centroids[[c, t]]);
                d_z[[i, t]] += diff;
                d_mu[[c, t]] -= diff;
            }
        }
    }
    let d_out = (out - &x) * (2.0 * w.beta / mf);
    debug_assert_eq!(d_mu.nrows(), k);
    let grads = params.backward(&cache, Some(d_z.view()), Some(d_out.view()));
    Ok(Evaluated {
        value,
        grads,
        d_centroids: d_mu,
    })
}

/// Gradient of `mean_i KL(p_i || U)` w.r.t. the log kernel weights, where
/// `p = sharpen(q, f)` and `f` are the column sums of `q`.
fn uniform_log_kernel_grad(
    q: ArrayView2<'_, f64>,
    p: ArrayView2<'_, f64>,
    f: &[f64],
) -> Array2<f64> {
    let (m, k) = q.dim();
    let mf = m as f64;
    let kf = k as f64;
    // dL/dlog r with r = q^2 / f, through the row normalization of p
    let mut h = Array2::zeros((m, k));
    for i in 0..m {
        let gi: Vec<f64> = p
            .row(i)
            .iter()
            .map(|&v| if v > 0.0 { ((v * kf).ln() + 1.0) / mf } else { 0.0 })
            .collect();
        let mean: f64 = p.row(i).iter().zip(&gi).map(|(a, b)| a * b).sum();
        for j in 0..k {
            h[[i, j]] = p[[i, j]] * (gi[j] - mean);
        }
    }
    let big_f: Vec<f64> = (0..k).map(|j| -h.column(j).sum() / f[j]).collect();
    let mut dlogq = h * 2.0;
    for i in 0..m {
        for j in 0..k {
            dlogq[[i, j]] += q[[i, j]] * big_f[j];
        }
    }
    // through the row normalization of q
    let mut out = dlogq.clone();
    for i in 0..m {
        let s = dlogq.row(i).sum();
        for j in 0..k {
            out[[i, j]] -= q[[i, j]] * s;
        }
    }
    out
}
