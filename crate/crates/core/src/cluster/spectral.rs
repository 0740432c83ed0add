use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2, Axis};

use super::kmeans::{kmeans, KMeansParams};
use crate::error::{Error, Result};
use crate::types::{ClusterModel, InitSource};

const SYMMETRY_TOL: f64 = 1e-10;

/// Non-negative symmetric affinity matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix(Array2<f64>);

impl SimilarityMatrix {
    pub fn new(a: Array2<f64>) -> Result<Self> {
        let (n, m) = a.dim();
        if n != m {
            return Err(Error::InvalidArgument(format!(
                "similarity matrix must be square, got {n}x{m}"
            )));
        }
        for i in 0..n {
            if (a[[i, i]] - 1.0).abs() > SYMMETRY_TOL {
                return Err(Error::InvalidArgument(format!(
                    "diagonal entry {i} is {}, expected 1",
                    a[[i, i]]
                )));
            }
            for j in 0..n {
                let v = a[[i, j]];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::InvalidArgument(format!("entry ({i}, {j}) = {v}")));
                }
                if (v - a[[j, i]]).abs() >= SYMMETRY_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "asymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self(a))
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }
}

/// Clamped cosine similarity `max(0, cos(x_i, x_j))`, diagonal set to 1.
pub fn cosine_similarity(x: ArrayView2<'_, f64>) -> Result<SimilarityMatrix> {
    let n = x.nrows();
    let norms: Vec<f64> = x.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
    if let Some(index) = norms.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::ZeroNorm { index });
    }
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        a[[i, i]] = 1.0;
        for j in (i + 1)..n {
            let c = (x.row(i).dot(&x.row(j)) / (norms[i] * norms[j])).max(0.0);
            a[[i, j]] = c;
            a[[j, i]] = c;
        }
    }
    Ok(SimilarityMatrix(a))
}

/// Result of the spectral embedding step.
#[derive(Debug, Clone)]
pub struct SpectralFit {
    pub labels: Vec<usize>,
    /// The `k` smallest eigenvalues of the normalized Laplacian, ascending.
    pub eigenvalues: Vec<f64>,
}

/// Clusters the nodes of an affinity graph.
///
/// Builds `L = I - D^-1/2 A D^-1/2`, embeds each node with the eigenvectors
/// of the `k` smallest eigenvalues, normalizes the embedded rows to unit
/// length and runs k-Means on them.
pub fn spectral_cluster_affinity(
    a: &SimilarityMatrix,
    k: usize,
    seed: u64,
    params: KMeansParams,
) -> Result<SpectralFit> {
    let n = a.len();
    if k < 2 || k > n {
        return Err(Error::InvalidArgument(format!(
            "spectral clustering needs 2 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    let a = a.view();
    let degree: Vec<f64> = a.rows().into_iter().map(|r| r.sum()).collect();
    if let Some(index) = degree.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::ZeroDegree { index });
    }
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let lap = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - inv_sqrt[i] * a[[i, j]] * inv_sqrt[j]
    });
    let eig = nalgebra::SymmetricEigen::try_new(lap, f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen("laplacian eigen decomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]).then(p.cmp(&q)));

    let mut emb = Array2::zeros((n, k));
    for (col, &src) in order.iter().take(k).enumerate() {
        for i in 0..n {
            emb[[i, col]] = eig.eigenvectors[(i, src)];
        }
    }
    for mut row in emb.rows_mut() {
        let norm = row.dot(&row).sqrt();
        if norm > 0.0 {
            row /= norm;
        }
    }
    let fit = kmeans(emb.view(), &params.config(k, seed))?;
    Ok(SpectralFit {
        labels: fit.model.assignments,
        eigenvalues: order.iter().take(k).map(|&i| eig.eigenvalues[i]).collect(),
    })
}

/// Spectral clustering of samples through their clamped cosine affinity.
///
/// Centroids of the returned model are member means in the input space so
/// that the model can label new samples.
pub fn spectral_cluster(
    x: ArrayView2<'_, f64>,
    k: usize,
    seed: u64,
    params: KMeansParams,
) -> Result<ClusterModel> {
    let a = cosine_similarity(x)?;
    let fit = spectral_cluster_affinity(&a, k, seed, params)?;
    let centroids = member_means(x, &fit.labels, k);
    ClusterModel::new(centroids, fit.labels, InitSource::PlusplusInit, seed)
}

/// Per-cluster means; empty clusters keep a zero row.
pub(crate) fn member_means(x: ArrayView2<'_, f64>, labels: &[usize], k: usize) -> Array2<f64> {
    let mut sums = Array2::zeros((k, x.ncols()));
    let mut counts = vec![0usize; k];
    for (r, &j) in x.axis_iter(Axis(0)).zip(labels) {
        sums.row_mut(j).scaled_add(1.0, &r);
        counts[j] += 1;
    }
    for (j, c) in counts.into_iter().enumerate() {
        if c > 0 {
            sums.row_mut(j).mapv_inplace(|v| v / c as f64);
        }
    }
    sums
}
