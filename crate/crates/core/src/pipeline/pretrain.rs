use std::path::Path;

use ndarray::{concatenate, Array2, Axis};

use super::config::PipelineConfig;
use super::run::{dec_features, load_session};
use crate::dec::{loss_csv, pretrain_autoencoder, Checkpoint, CheckpointHeader, LossBreakdown, LossWeights, Pretrained};
use crate::error::{Error, Result};
use crate::io::{write_text, Manifest};

/// Sessions that could not be used, with the reason.
pub type Skipped = Vec<(String, String)>;

/// Pretrains the autoencoder on the DEC features of every manifest session
/// pooled together. Sessions that fail to load are skipped and listed.
pub fn pretrain_on_manifest(manifest: &Manifest, cfg: &PipelineConfig) -> Result<(Pretrained, Skipped)> {
    cfg.validate()?;
    let mut blocks: Vec<Array2<f64>> = Vec::new();
    let mut skipped = Vec::new();
    for entry in &manifest.sessions {
        match load_session(entry).and_then(|input| dec_features(&input, cfg)) {
            Ok(x) => blocks.push(x),
            Err(e) => skipped.push((entry.session_id.clone(), e.to_string())),
        }
    }
    if blocks.is_empty() {
        return Err(Error::NotEnoughSamples {
            msg: "no usable session to pretrain on".into(),
        });
    }
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    let x = concatenate(Axis(0), &views).map_err(|e| Error::InvalidArgument(format!("session dimensions differ: {e}")))?;
    let pcfg = &cfg.dec.pretrain;
    if pcfg.layer_sizes.first() != Some(&x.ncols()) {
        return Err(Error::DimensionMismatch {
            expected: x.ncols(),
            got: pcfg.layer_sizes.first().copied().unwrap_or(0),
        });
    }
    Ok((pretrain_autoencoder(x.view(), pcfg, cfg.seed)?, skipped))
}

/// Writes `autoencoder.ckpt` and `pretrain_loss.csv` under `dir`.
pub fn write_pretrained(dir: &Path, pre: &Pretrained, cfg: &PipelineConfig) -> Result<()> {
    let dec = cfg.dec_config();
    let ck = Checkpoint {
        header: CheckpointHeader {
            layer_sizes: pre.params.layer_sizes().to_vec(),
            a: dec.a,
            exponent: dec.exponent,
            weights: dec.weights,
            seed: cfg.seed,
            epoch: pre.history.len() - 1,
            k: 0,
        },
        params: pre.params.clone(),
        centroids: None,
    };
    ck.save(dir.join("autoencoder.ckpt"))?;
    let recon_only = LossWeights {
        alpha: 0.0,
        beta: 1.0,
        gamma: 0.0,
        delta: 0.0,
    };
    let rows: Vec<LossBreakdown> = pre
        .history
        .iter()
        .map(|&l| LossBreakdown::new(0.0, l, 0.0, 0.0, recon_only))
        .collect();
    write_text(dir.join("pretrain_loss.csv"), &loss_csv(&rows))
}
