use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent of the Student-t kernel `(1 + d^2 / a)^-e`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exponent {
    /// `e = (a + 1) / a`
    #[default]
    Printed,
    /// `e = (a + 1) / 2`, the usual t-distribution form.
    Standard,
}

impl Exponent {
    pub fn value(self, a: f64) -> f64 {
        match self {
            Exponent::Printed => (a + 1.0) / a,
            Exponent::Standard => (a + 1.0) / 2.0,
        }
    }
}

/// Squared distances between every code and every centroid, `n x k`.
pub fn sq_distances(z: ArrayView2<'_, f64>, centroids: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut d2 = Array2::zeros((z.nrows(), centroids.nrows()));
    for (i, zi) in z.rows().into_iter().enumerate() {
        for (j, mu) in centroids.rows().into_iter().enumerate() {
            d2[[i, j]] = zi.iter().zip(mu.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        }
    }
    d2
}

/// Row-normalized kernel given precomputed squared distances.
pub(crate) fn kernel_rows(d2: &Array2<f64>, a: f64, e: f64) -> Array2<f64> {
    // log-space so far centroids underflow gracefully
    let mut q = d2.mapv(|d| -e * (d / a).ln_1p());
    for mut row in q.rows_mut() {
        let top = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - top).exp());
        let s = row.sum();
        row /= s;
    }
    q
}

/// Student-t soft assignment of codes to centroids; rows sum to 1.
pub fn soft_assign(
    z: ArrayView2<'_, f64>,
    centroids: ArrayView2<'_, f64>,
    a: f64,
    exponent: Exponent,
) -> Result<Array2<f64>> {
    if !(a > 0.0) {
        return Err(Error::InvalidArgument(format!("student-t parameter a = {a}")));
    }
    if z.ncols() != centroids.ncols() {
        return Err(Error::DimensionMismatch {
            expected: centroids.ncols(),
            got: z.ncols(),
        });
    }
    Ok(kernel_rows(&sq_distances(z, centroids), a, exponent.value(a)))
}

/// Sharpened targets `p_ij ~ q_ij^2 / f_j` with `f_j` the column sums of `q`.
pub fn target_distribution(q: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let f = q.sum_axis(Axis(0));
    if let Some(cluster) = f.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::EmptySoftCluster { cluster });
    }
    Ok(sharpen(q, &f.to_vec()))
}

pub(crate) fn sharpen(q: ArrayView2<'_, f64>, f: &[f64]) -> Array2<f64> {
    let mut p = q.to_owned();
    for mut row in p.rows_mut() {
        for (v, &fj) in row.iter_mut().zip(f) {
            *v = *v * *v / fj;
        }
        let s = row.sum();
        row /= s;
    }
    p
}

/// Hard labels, ties to the lowest cluster index.
pub fn argmax_rows(q: ArrayView2<'_, f64>) -> Vec<usize> {
    q.rows()
        .into_iter()
        .map(|r| {
            let mut best = 0;
            for (j, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn hand_values() {
        // distances 1 and sqrt 3, a = 1: weights 2^-2 and 4^-2
        let z = array![[0.0, 0.0]];
        let mu = array![[1.0, 0.0], [0.0, 3f64.sqrt()]];
        let q = soft_assign(z.view(), mu.view(), 1.0, Exponent::Printed).unwrap();
        assert!((q[[0, 0]] - 0.8).abs() < 1e-12);
        assert!((q[[0, 1]] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn exponent_forms() {
        assert_eq!(Exponent::Printed.value(2.0), Exponent::Standard.value(2.0));
        assert_eq!(Exponent::Printed.value(1.0), 2.0);
        assert_eq!(Exponent::Printed.value(2.0), 1.5);
        assert_eq!(Exponent::Standard.value(3.0), 2.0);
        // a = 2, d^2 = 2 and 6: (1 + 1)^-e vs (1 + 3)^-e
        let z = array![[0.0]];
        let mu = array![[2f64.sqrt()], [6f64.sqrt()]];
        for (ex, e) in [(Exponent::Printed, 1.5), (Exponent::Standard, 1.5f64)] {
            let q = soft_assign(z.view(), mu.view(), 2.0, ex).unwrap();
            let w = [2f64.powf(-e), 4f64.powf(-e)];
            assert!((q[[0, 0]] - w[0] / (w[0] + w[1])).abs() < 1e-12);
        }
        let q = soft_assign(z.view(), mu.view(), 3.0, Exponent::Standard).unwrap();
        let w = [(1.0 + 2.0 / 3.0f64).powi(-2), 3f64.powi(-2)];
        assert!((q[[0, 0]] - w[0] / (w[0] + w[1])).abs() < 1e-12);
    }

    #[test]
    fn dominance_and_symmetry() {
        let z = array![[1.0, 1.0]];
        let mu = array![[1.0, 1.0], [1e6, 0.0], [0.0, -1e6]];
        let q = soft_assign(z.view(), mu.view(), 1.0, Exponent::Printed).unwrap();
        assert!(q[[0, 0]] > 0.999999);
        let mu = array![[0.0, 1.0], [2.0, 1.0]];
        let q = soft_assign(z.view(), mu.view(), 1.0, Exponent::Printed).unwrap();
        assert_eq!(q, array![[0.5, 0.5]]);
        assert!(soft_assign(z.view(), mu.view(), 0.0, Exponent::Printed).is_err());
    }

    #[test]
    fn target_hand_values() {
        let q = array![[0.8, 0.2], [0.4, 0.6]];
        let p = target_distribution(q.view()).unwrap();
        // f = [1.2, 0.8]; unnormalized first row [0.5333, 0.05]
        let r = [0.64 / 1.2, 0.04 / 0.8];
        assert!((p[[0, 0]] - r[0] / (r[0] + r[1])).abs() < 1e-12);
        assert!((p[[0, 0]] - 0.9143).abs() < 1e-4);
        assert!((p[[0, 1]] - 0.0857).abs() < 1e-4);
    }

    #[test]
    fn target_fixed_points() {
        let onehot = array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]];
        assert_eq!(target_distribution(onehot.view()).unwrap(), onehot);
        let uniform = Array2::from_elem((4, 3), 1.0 / 3.0);
        let p = target_distribution(uniform.view()).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        let dead = array![[1.0, 0.0], [1.0, 0.0]];
        assert!(matches!(
            target_distribution(dead.view()),
            Err(Error::EmptySoftCluster { cluster: 1 })
        ));
    }

    proptest! {
        #[test]
        fn rows_are_distributions(
            zs in prop::collection::vec(-5.0f64..5.0, 12),
            ms in prop::collection::vec(-5.0f64..5.0, 6),
            a in 0.2f64..4.0,
        ) {
            let z = Array2::from_shape_vec((6, 2), zs).unwrap();
            let mu = Array2::from_shape_vec((3, 2), ms).unwrap();
            for ex in [Exponent::Printed, Exponent::Standard] {
                let q = soft_assign(z.view(), mu.view(), a, ex).unwrap();
                let p = target_distribution(q.view()).unwrap();
                for m in [&q, &p] {
                    for row in m.rows() {
                        prop_assert!((row.sum() - 1.0).abs() < 1e-9);
                        prop_assert!(row.iter().all(|&v| v > 0.0 && v <= 1.0));
                    }
                }
            }
        }
    }
}
