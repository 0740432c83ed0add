use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::assign::Exponent;
use super::loss::{LossBreakdown, LossWeights};
use super::network::AutoencoderParams;
use crate::error::{Error, Result};
use crate::io::{decode_blob, encode_blob};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub layer_sizes: Vec<usize>,
    pub a: f64,
    pub exponent: Exponent,
    pub weights: LossWeights,
    pub seed: u64,
    pub epoch: usize,
    /// Number of latent centroids stored after the network parameters.
    pub k: usize,
}

/// Network parameters plus optional latent centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: AutoencoderParams,
    pub centroids: Option<Array2<f64>>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let values = self
            .params
            .values()
            .chain(self.centroids.iter().flat_map(|c| c.iter().copied()).collect::<Vec<_>>());
        encode_blob(&self.header, values)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, values): (CheckpointHeader, Vec<f64>) = decode_blob(bytes)?;
        let mut params = AutoencoderParams::zeros(&header.layer_sizes)?;
        let n = params.n_params();
        let b = params.code_dim();
        let expected = n + header.k * b;
        if values.len() != expected {
            return Err(Error::Format(format!(
                "checkpoint holds {} values, header implies {expected}",
                values.len()
            )));
        }
        params.set_values(&values[..n])?;
        let centroids = (header.k > 0).then(|| {
            Array2::from_shape_vec((header.k, b), values[n..].to_vec()).expect("sized above")
        });
        Ok(Self {
            header,
            params,
            centroids,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_bytes(path, &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Loss curve as CSV with one row per history entry, starting at epoch 0.
pub fn loss_csv(history: &[LossBreakdown]) -> String {
    let mut s = String::from("epoch,l_c,l_r,l_u,l_mse,total\n");
    for (e, b) in history.iter().enumerate() {
        writeln!(s, "{e},{},{},{},{},{}", b.l_c, b.l_r, b.l_u, b.l_mse, b.total).expect("string write");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_at_f32_precision() {
        let params = AutoencoderParams::new(&[4, 6, 2, 6, 4], 5).unwrap();
        let ck = Checkpoint {
            header: CheckpointHeader {
                layer_sizes: vec![4, 6, 2, 6, 4],
                a: 1.0,
                exponent: Exponent::Standard,
                weights: LossWeights::IMPROVED,
                seed: 9,
                epoch: 12,
                k: 3,
            },
            params: params.clone(),
            centroids: Some(Array2::from_shape_fn((3, 2), |(i, j)| i as f64 - 0.25 * j as f64)),
        };
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back.header, ck.header);
        assert_eq!(back.centroids, ck.centroids);
        for (a, b) in back.params.values().zip(params.values()) {
            assert_eq!(a, b as f32 as f64);
        }
        let mut bytes = ck.to_bytes();
        bytes.truncate(bytes.len() - 4);
        assert!(Checkpoint::from_bytes(&bytes).is_err());
    }

    #[test]
    fn csv_layout() {
        let h = [LossBreakdown::new(0.5, 1.0, 0.0, 0.25, LossWeights::ORIGINAL)];
        assert_eq!(loss_csv(&h), "epoch,l_c,l_r,l_u,l_mse,total\n0,0.5,1,0,0.25,0.5\n");
    }
}
