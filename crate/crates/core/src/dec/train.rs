use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adamax::Adamax;
use super::assign::{argmax_rows, soft_assign, target_distribution, Exponent};
use super::loss::{breakdown, evaluate, reconstruction_mse, LossBreakdown, LossWeights, Objective};
use super::network::{AutoencoderParams, DESK_LAYERS};
use crate::cluster::{kmeans, kmeans_objective, KMeansInit, KMeansParams};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng};
use crate::types::{ClusterModel, InitSource};

const STREAM_INIT: u64 = 1;
const STREAM_DROPOUT: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;
const STREAM_KMEANS: u64 = 4;

/// Autoencoder pretraining settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub layer_sizes: Vec<usize>,
    pub epochs: usize,
    pub dropout: f64,
    pub lr: f64,
    pub batch: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            layer_sizes: DESK_LAYERS.to_vec(),
            epochs: 100,
            dropout: 0.2,
            lr: 0.001,
            batch: 64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Pretrained {
    pub params: AutoencoderParams,
    /// Mean reconstruction loss before training, then after every epoch.
    pub history: Vec<f64>,
}

/// Trains the autoencoder alone on reconstruction loss.
///
/// A batch larger than the data set shrinks to the data set.
pub fn pretrain_autoencoder(
    x: ArrayView2<'_, f64>,
    cfg: &PretrainConfig,
    seed: u64,
) -> Result<Pretrained> {
    let params = AutoencoderParams::new(&cfg.layer_sizes, derive_seed(seed, STREAM_INIT))?;
    pretrain_from(params, x, cfg, seed)
}

/// Continues reconstruction training from existing parameters.
pub fn pretrain_from(
    mut params: AutoencoderParams,
    x: ArrayView2<'_, f64>,
    cfg: &PretrainConfig,
    seed: u64,
) -> Result<Pretrained> {
    let n = x.nrows();
    if n == 0 || cfg.batch == 0 {
        return Err(Error::NotEnoughSamples {
            msg: "pretraining needs samples and a positive batch".into(),
        });
    }
    let batch = cfg.batch.min(n);
    let recon = |p: &AutoencoderParams| -> Result<f64> {
        let (_, out) = super::network::ae_forward(p, x, 0.0, 0)?;
        Ok(reconstruction_mse(x, out.view()))
    };
    let mut history = vec![recon(&params)?];
    let mut opt = Adamax::new(params.n_params(), cfg.lr);
    let mut shuffle = rng(derive_seed(seed, STREAM_SHUFFLE));
    let mut order: Vec<usize> = (0..n).collect();
    let mut step: u64 = 0;
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle);
        for (b, idx) in order.chunks(batch).enumerate() {
            let xb = x.select(Axis(0), idx);
            let cache = params.forward_cached(
                xb.view(),
                cfg.dropout,
                derive_seed(derive_seed(seed, STREAM_DROPOUT), step),
            )?;
            step += 1;
            let out = cache.output();
            let loss = reconstruction_mse(xb.view(), out.view());
            if !loss.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    detail: format!("reconstruction loss {loss}"),
                });
            }
            let d_out = (out - &xb) * (2.0 / idx.len() as f64);
            let grads = params.backward(&cache, None, Some(d_out.view()));
            opt.step(params.values_mut(), flat(&grads));
        }
        history.push(recon(&params)?);
    }
    Ok(Pretrained { params, history })
}

fn flat(g: &super::network::Gradients) -> impl Iterator<Item = f64> + '_ {
    g.w.iter()
        .zip(&g.b)
        .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
}

/// Clustering-phase settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecConfig {
    pub pretrain: PretrainConfig,
    /// Student-t parameter.
    pub a: f64,
    pub exponent: Exponent,
    pub weights: LossWeights,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    /// Epochs between k-Means re-calibrations of the centroids; 0 disables.
    pub recalib_period: usize,
    /// Epochs between target refreshes.
    pub target_update_period: usize,
    pub kmeans: KMeansParams,
    /// Let the uniformity term's gradient flow through the batch targets.
    pub live_uniform: bool,
}

impl Default for DecConfig {
    fn default() -> Self {
        Self {
            pretrain: PretrainConfig::default(),
            a: 1.0,
            exponent: Exponent::Printed,
            weights: LossWeights::IMPROVED,
            lr: 0.001,
            batch: 64,
            epochs: 100,
            recalib_period: 20,
            target_update_period: 5,
            kmeans: KMeansParams::default(),
            live_uniform: false,
        }
    }
}

impl DecConfig {
    pub fn improved() -> Self {
        Self::default()
    }

    /// Clustering loss only and no re-calibration.
    pub fn original() -> Self {
        Self {
            weights: LossWeights::ORIGINAL,
            recalib_period: 0,
            ..Self::default()
        }
    }
}

/// Trainer state after some number of epochs.
#[derive(Debug, Clone)]
pub struct DecState {
    pub params: AutoencoderParams,
    pub centroids: Array2<f64>,
    pub z: Array2<f64>,
    pub q: Array2<f64>,
    pub p: Array2<f64>,
    pub a: f64,
    pub exponent: Exponent,
    pub weights: LossWeights,
    pub recalib_period: usize,
}

impl DecState {
    /// Encodes `x` and builds `q` and `p` against the given centroids.
    pub fn new(
        params: AutoencoderParams,
        centroids: Array2<f64>,
        x: ArrayView2<'_, f64>,
        cfg: &DecConfig,
    ) -> Result<Self> {
        let z = params.encode(x)?;
        let q = soft_assign(z.view(), centroids.view(), cfg.a, cfg.exponent)?;
        let p = target_distribution(q.view())?;
        Ok(Self {
            params,
            centroids,
            z,
            q,
            p,
            a: cfg.a,
            exponent: cfg.exponent,
            weights: cfg.weights,
            recalib_period: cfg.recalib_period,
        })
    }

    fn refresh_q(&mut self, x: ArrayView2<'_, f64>) -> Result<()> {
        self.z = self.params.encode(x)?;
        self.q = soft_assign(self.z.view(), self.centroids.view(), self.a, self.exponent)?;
        Ok(())
    }

    fn refresh_p(&mut self) -> Result<()> {
        self.p = target_distribution(self.q.view())?;
        Ok(())
    }

    pub fn labels(&self) -> Vec<usize> {
        argmax_rows(self.q.view())
    }
}

/// All four loss terms on the full data set for the current state.
pub fn loss_terms(x: ArrayView2<'_, f64>, state: &DecState) -> Result<LossBreakdown> {
    let (_, out) = super::network::ae_forward(&state.params, x, 0.0, 0)?;
    breakdown(
        x,
        out.view(),
        state.z.view(),
        state.centroids.view(),
        state.q.view(),
        state.p.view(),
        state.weights,
    )
}

#[derive(Debug, Clone)]
pub struct DecFit {
    pub state: DecState,
    /// Latent centroids and final hard labels.
    pub model: ClusterModel,
    /// Loss breakdown after initialization, then after every epoch.
    pub history: Vec<LossBreakdown>,
    pub pretrain_history: Vec<f64>,
    /// Clusters without members at the end; nonzero is a warning.
    pub empty_clusters: usize,
    pub recalibrations: usize,
}

/// k-Means on the codes, optionally competing with the current centroids.
fn kmeans_on_codes(
    z: ArrayView2<'_, f64>,
    k: usize,
    current: Option<&Array2<f64>>,
    params: &KMeansParams,
    seed: u64,
) -> Result<Array2<f64>> {
    let fresh = kmeans(z, &params.config(k, seed))?;
    let mut best = (fresh.objective, fresh.model.centroids);
    if let Some(c) = current {
        let cfg = params.config(k, seed).with_init(KMeansInit::Given(c.clone()));
        let warm = kmeans(z, &cfg)?;
        let obj = kmeans_objective(z, warm.model.centroids.view(), &warm.model.assignments);
        if obj < best.0 {
            best = (obj, warm.model.centroids);
        }
    }
    Ok(best.1)
}

/// Full clustering run: pretraining (unless parameters are supplied),
/// k-Means initialization of the centroids, then self-training.
pub fn train_dec(
    x: ArrayView2<'_, f64>,
    k: usize,
    cfg: &DecConfig,
    pretrained: Option<&AutoencoderParams>,
    seed: u64,
) -> Result<DecFit> {
    let n = x.nrows();
    if k == 0 || n < k {
        return Err(Error::NotEnoughSamples {
            msg: format!("dec needs n >= k >= 1, got n = {n}, k = {k}"),
        });
    }
    if cfg.batch == 0 || cfg.target_update_period == 0 {
        return Err(Error::InvalidArgument(
            "batch and target_update_period must be positive".into(),
        ));
    }
    let (params, pretrain_history) = match pretrained {
        Some(p) => (p.clone(), Vec::new()),
        None => {
            let pre = pretrain_autoencoder(x, &cfg.pretrain, seed)?;
            (pre.params, pre.history)
        }
    };
    let kseed = derive_seed(seed, STREAM_KMEANS);
    let z0 = params.encode(x)?;
    let mu0 = kmeans_on_codes(z0.view(), k, None, &cfg.kmeans, kseed)?;
    let mut state = DecState::new(params, mu0, x, cfg)?;
    let mut history = vec![loss_terms(x, &state)?];

    let batch = cfg.batch.min(n);
    let mut opt = Adamax::new(state.params.n_params(), cfg.lr);
    let mut opt_mu = Adamax::new(state.centroids.len(), cfg.lr);
    let mut shuffle = rng(derive_seed(seed, STREAM_SHUFFLE));
    let mut order: Vec<usize> = (0..n).collect();
    let mut recalibrations = 0;

    for epoch in 1..=cfg.epochs {
        let recalib = cfg.recalib_period > 0 && epoch > 1 && (epoch - 1) % cfg.recalib_period == 0;
        if recalib {
            state.refresh_q(x)?;
            state.centroids = kmeans_on_codes(
                state.z.view(),
                k,
                Some(&state.centroids),
                &cfg.kmeans,
                derive_seed(kseed, epoch as u64),
            )?;
            opt_mu = Adamax::new(state.centroids.len(), cfg.lr);
            state.refresh_q(x)?;
            state.refresh_p()?;
            recalibrations += 1;
        } else if epoch > 1 && (epoch - 1) % cfg.target_update_period == 0 {
            state.refresh_q(x)?;
            state.refresh_p()?;
        }
        order.shuffle(&mut shuffle);
        for (b, idx) in order.chunks(batch).enumerate() {
            let xb = x.select(Axis(0), idx);
            let pb = state.p.select(Axis(0), idx);
            let obj = Objective {
                x: xb.view(),
                p: pb.view(),
                a: state.a,
                exponent: state.exponent,
                weights: state.weights,
                live_uniform: cfg.live_uniform,
            };
            let ev = evaluate(&state.params, state.centroids.view(), &obj).map_err(|e| {
                Error::Diverged {
                    epoch,
                    batch: b,
                    detail: e.to_string(),
                }
            })?;
            opt.step(state.params.values_mut(), flat(&ev.grads));
            opt_mu.step(state.centroids.iter_mut(), ev.d_centroids.iter().copied());
        }
        if !state.params.is_finite() || state.centroids.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                batch: 0,
                detail: "non-finite parameters".into(),
            });
        }
        state.refresh_q(x)?;
        let b = loss_terms(x, &state).map_err(|e| Error::Diverged {
            epoch,
            batch: 0,
            detail: e.to_string(),
        })?;
        history.push(b);
    }
    let labels = state.labels();
    let model = ClusterModel::new(state.centroids.clone(), labels, InitSource::PlusplusInit, seed)?;
    let empty_clusters = model.empty_clusters();
    Ok(DecFit {
        state,
        model,
        history,
        pretrain_history,
        empty_clusters,
        recalibrations,
    })
}
