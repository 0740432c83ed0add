use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{matrix_to_rows, rows_to_matrix, SegmentEmbedding};

/// Output dimension used for clustering front-ends.
pub const DEFAULT_PCA_DIM: usize = 70;
/// Segments shorter than this (seconds) are left out of whitener training.
pub const DEFAULT_PCA_MIN_DURATION: f64 = 1.0;

/// Relative floor on principal standard deviations before inversion.
const SCALE_FLOOR: f64 = 1e-8;

/// Centering, projection onto the leading principal directions, and
/// per-direction scaling to unit variance.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaWhitener {
    mean: Array1<f64>,
    basis: Array2<f64>,
    scales: Array1<f64>,
}

impl PcaWhitener {
    pub fn mean(&self) -> ArrayView1<'_, f64> {
        self.mean.view()
    }

    /// `D x d`, orthonormal columns sorted by decreasing variance.
    pub fn basis(&self) -> ArrayView2<'_, f64> {
        self.basis.view()
    }

    pub fn scales(&self) -> ArrayView1<'_, f64> {
        self.scales.view()
    }

    pub fn in_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.basis.ncols()
    }

    /// Whitens every row of `x`.
    /// Same centering and basis with unit scales: a plain PCA projection.
    pub fn projection_only(&self) -> Self {
        Self {
            scales: Array1::ones(self.scales.len()),
            ..self.clone()
        }
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim(),
                got: x.ncols(),
            });
        }
        let centered = &x - &self.mean.view().insert_axis(Axis(0));
        Ok(centered.dot(&self.basis) * self.scales.view().insert_axis(Axis(0)))
    }

    pub fn transform_vector(&self, v: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        Ok(self
            .transform(v.insert_axis(Axis(0)))?
            .index_axis_move(Axis(0), 0))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(PcaJson {
            mean: self.mean.to_vec(),
            basis: matrix_to_rows(self.basis.view()),
            scales: self.scales.to_vec(),
        })
        .expect("whitener serializes")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let raw: PcaJson = serde_json::from_value(v.clone())?;
        let basis = rows_to_matrix(&raw.basis)?;
        if basis.nrows() != raw.mean.len() || basis.ncols() != raw.scales.len() {
            return Err(Error::Format("inconsistent whitener shapes".into()));
        }
        Ok(Self {
            mean: Array1::from(raw.mean),
            basis,
            scales: Array1::from(raw.scales),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct PcaJson {
    mean: Vec<f64>,
    basis: Vec<Vec<f64>>,
    scales: Vec<f64>,
}

/// Fits a whitener on the rows of `x` (population covariance).
///
/// Eigenvectors are sign-normalized so that their largest-magnitude component
/// is positive, which makes the fit deterministic for a given input.
pub fn fit_pca(x: ArrayView2<'_, f64>, out_dim: usize) -> Result<PcaWhitener> {
    let (n, d) = x.dim();
    if out_dim == 0 || out_dim > d {
        return Err(Error::InvalidArgument(format!(
            "pca output dimension must be in 1..={d}, got {out_dim}"
        )));
    }
    if n < out_dim {
        return Err(Error::NotEnoughSamples {
            msg: format!(
                "pca to {out_dim} dims needs at least {out_dim} samples, got {n}; \
                 lower the output dimension or the duration threshold"
            ),
        });
    }
    let mean = x.mean_axis(Axis(0)).expect("n >= 1");
    let centered = &x - &mean.view().insert_axis(Axis(0));
    let cov = centered.t().dot(&centered) / n as f64;

    let sym = DMatrix::from_fn(d, d, |i, j| 0.5 * (cov[[i, j]] + cov[[j, i]]));
    let eig = nalgebra::SymmetricEigen::try_new(sym, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen("covariance eigen decomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let mut basis = Array2::zeros((d, out_dim));
    let mut stds = Array1::zeros(out_dim);
    for (col, &src) in order.iter().take(out_dim).enumerate() {
        let v = eig.eigenvectors.column(src);
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |m, c| if c.abs() > m.abs() { c } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for r in 0..d {
            basis[[r, col]] = sign * v[r];
        }
        stds[col] = eig.eigenvalues[src].max(0.0).sqrt();
    }
    let floor = SCALE_FLOOR * stds[0].max(f64::MIN_POSITIVE);
    let scales = stds.mapv(|s: f64| 1.0 / s.max(floor));
    Ok(PcaWhitener {
        mean,
        basis,
        scales,
    })
}

/// Fits a whitener on the embeddings whose duration is at least
/// `min_duration` seconds.
pub fn fit_pca_whitener(
    embeddings: &[SegmentEmbedding],
    out_dim: usize,
    min_duration: f64,
) -> Result<PcaWhitener> {
    let keep: Vec<&SegmentEmbedding> = embeddings
        .iter()
        .filter(|e| e.duration >= min_duration)
        .collect();
    if keep.len() < out_dim {
        return Err(Error::NotEnoughSamples {
            msg: format!(
                "only {} embeddings last at least {min_duration}s but pca to {out_dim} dims \
                 needs {out_dim}; lower the output dimension or the duration threshold",
                keep.len()
            ),
        });
    }
    let d = keep[0].dim();
    let mut x = Array2::zeros((keep.len(), d));
    for (mut row, e) in x.rows_mut().into_iter().zip(&keep) {
        if e.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: e.dim(),
            });
        }
        row.assign(&e.vector);
    }
    fit_pca(x.view(), out_dim)
}

/// Whitens one embedding; duration, index and label are carried over.
pub fn apply_whitener(w: &PcaWhitener, e: &SegmentEmbedding) -> Result<SegmentEmbedding> {
    Ok(SegmentEmbedding {
        vector: w.transform_vector(e.vector.view())?,
        duration: e.duration,
        segment_index: e.segment_index,
        ref_speaker: e.ref_speaker.clone(),
    })
}
