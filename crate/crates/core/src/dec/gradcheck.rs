use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::loss::{evaluate, LossWeights, Objective};
use super::train::DecState;
use crate::error::Result;

const STEP: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely.
const SCALE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossTerm {
    Cluster,
    Reconstruction,
    Uniform,
    Mse,
}

impl LossTerm {
    pub const ALL: [LossTerm; 4] = [
        LossTerm::Cluster,
        LossTerm::Reconstruction,
        LossTerm::Uniform,
        LossTerm::Mse,
    ];

    fn weights(self) -> LossWeights {
        let mut w = LossWeights {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            delta: 0.0,
        };
        match self {
            LossTerm::Cluster => w.alpha = 1.0,
            LossTerm::Reconstruction => w.beta = 1.0,
            LossTerm::Uniform => w.gamma = 1.0,
            LossTerm::Mse => w.delta = 1.0,
        }
        w
    }
}

fn objective<'a>(state: &'a DecState, x: ArrayView2<'a, f64>, term: LossTerm, live_uniform: bool) -> Objective<'a> {
    Objective {
        x,
        p: state.p.view(),
        a: state.a,
        exponent: state.exponent,
        weights: term.weights(),
        live_uniform,
    }
}

/// Analytic gradient of one loss term on `x`: every network parameter in
/// `AutoencoderParams::values` order, then the centroids row by row.
pub fn analytic_gradient(state: &DecState, x: ArrayView2<'_, f64>, term: LossTerm, live_uniform: bool) -> Result<Vec<f64>> {
    let ev = evaluate(&state.params, state.centroids.view(), &objective(state, x, term, live_uniform))?;
    Ok(ev
        .grads
        .w
        .iter()
        .zip(&ev.grads.b)
        .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
        .chain(ev.d_centroids.iter().copied())
        .collect())
}

/// Largest relative disagreement between the analytic gradient of one loss
/// term and central differences, over every network parameter and centroid
/// coordinate. `p` in the state is held fixed; the uniformity term is
/// differentiated through the targets of `x` when `live_uniform` is set.
pub fn grad_check(state: &DecState, x: ArrayView2<'_, f64>, term: LossTerm, live_uniform: bool) -> Result<f64> {
    let obj = objective(state, x, term, live_uniform);
    let analytic = analytic_gradient(state, x, term, live_uniform)?;

    let mut params = state.params.clone();
    let mut centroids = state.centroids.clone();
    let base: Vec<f64> = params.values().collect();
    let n_net = base.len();
    let mut worst: f64 = 0.0;
    for (idx, &a) in analytic.iter().enumerate() {
        let f = |delta: f64, params: &mut super::network::AutoencoderParams, centroids: &mut ndarray::Array2<f64>| -> Result<f64> {
            if idx < n_net {
                let v = params.values_mut().nth(idx).expect("index in range");
                *v = base[idx] + delta;
            } else {
                let v = centroids.iter_mut().nth(idx - n_net).expect("index in range");
                *v = state.centroids.iter().nth(idx - n_net).copied().expect("index") + delta;
            }
            let value = evaluate(params, centroids.view(), &obj)?.value;
            Ok(value)
        };
        let plus = f(STEP, &mut params, &mut centroids)?;
        let minus = f(-STEP, &mut params, &mut centroids)?;
        f(0.0, &mut params, &mut centroids)?;
        let numeric = (plus - minus) / (2.0 * STEP);
        let scale = a.abs().max(numeric.abs()).max(SCALE_FLOOR);
        worst = worst.max((a - numeric).abs() / scale);
    }
    Ok(worst)
}
