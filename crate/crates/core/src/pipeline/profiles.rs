use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::prep::median;
use crate::types::SpeakerProfiles;

/// Speaker profiles from a previous session's clustering: one per-dimension
/// median per non-empty cluster, labeled `c{j}`. Empty clusters are skipped
/// and reported in the returned warnings.
pub fn profiles_from_session(
    x: ArrayView2<'_, f64>,
    labels: &[usize],
    k: usize,
) -> Result<(SpeakerProfiles, Vec<String>)> {
    if labels.len() != x.nrows() {
        return Err(Error::LengthMismatch {
            what: "labels vs embeddings",
            expected: x.nrows(),
            got: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&j| j >= k) {
        return Err(Error::InvalidArgument(format!("label {bad} out of range for k = {k}")));
    }
    let mut warnings = Vec::new();
    let mut names = Vec::new();
    let mut vectors = Vec::new();
    for j in 0..k {
        let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == j).collect();
        if members.is_empty() {
            warnings.push(format!("cluster c{j} is empty; no profile created"));
            continue;
        }
        let mut col = vec![0.0; members.len()];
        let v: Vec<f64> = (0..x.ncols())
            .map(|d| {
                for (slot, &i) in col.iter_mut().zip(&members) {
                    *slot = x[[i, d]];
                }
                median(&mut col)
            })
            .collect();
        names.push(format!("c{j}"));
        vectors.push(v);
    }
    if names.is_empty() {
        return Err(Error::NotEnoughSamples {
            msg: "every cluster is empty".into(),
        });
    }
    let d = x.ncols();
    let flat: Vec<f64> = vectors.into_iter().flatten().collect();
    let m = Array2::from_shape_vec((names.len(), d), flat).expect("row lengths match");
    Ok((SpeakerProfiles::new(names, m)?, warnings))
}
