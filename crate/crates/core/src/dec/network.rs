use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng;

/// Full-size layer plan.
pub const FULL_LAYERS: [usize; 7] = [200, 2048, 2048, 15, 2048, 2048, 200];
/// Same depth and bottleneck with 256-wide hidden layers.
pub const DESK_LAYERS: [usize; 7] = [200, 256, 256, 15, 256, 256, 200];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Linear => v,
        }
    }
}

/// One dense layer, `y = act(x W + b)` with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
    pub act: Activation,
}

/// Symmetric dense autoencoder.
///
/// `code_layer` is the index into `layer_sizes` of the code; layers before
/// it form the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderParams {
    layer_sizes: Vec<usize>,
    code_layer: usize,
    pub layers: Vec<Dense>,
}

/// Gradient with the same shapes as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w: Vec<Array2<f64>>,
    pub b: Vec<Array1<f64>>,
}

fn code_index(sizes: &[usize]) -> usize {
    if sizes.len() <= 2 {
        return sizes.len() - 1;
    }
    let inner = &sizes[1..sizes.len() - 1];
    let min = *inner.iter().min().expect("non-empty");
    1 + inner.iter().position(|&s| s == min).expect("present")
}

impl AutoencoderParams {
    /// Uniform fan-in initialization, `U(-sqrt(6 / fan_in), +sqrt(6 / fan_in))`,
    /// zero biases. Hidden layers use ReLU; code and output are linear.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        let mut p = Self::zeros(layer_sizes)?;
        let mut r = rng(seed);
        for layer in &mut p.layers {
            let bound = (6.0 / layer.w.nrows() as f64).sqrt();
            layer.w.mapv_inplace(|_| r.random_range(-bound..bound));
        }
        Ok(p)
    }

    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "bad layer sizes {layer_sizes:?}"
            )));
        }
        let code_layer = code_index(layer_sizes);
        let last = layer_sizes.len() - 1;
        let layers = layer_sizes
            .windows(2)
            .enumerate()
            .map(|(l, io)| {
                let out = l + 1;
                let act = if out == code_layer || out == last {
                    Activation::Linear
                } else {
                    Activation::Relu
                };
                Dense {
                    w: Array2::zeros((io[0], io[1])),
                    b: Array1::zeros(io[1]),
                    act,
                }
            })
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            code_layer,
            layers,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn code_dim(&self) -> usize {
        self.layer_sizes[self.code_layer]
    }

    pub fn code_layer(&self) -> usize {
        self.code_layer
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(f64::is_finite)
    }

    /// All parameters in layer order, weights row-major before biases.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()).copied())
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> + '_ {
        self.layers
            .iter_mut()
            .flat_map(|l| l.w.iter_mut().chain(l.b.iter_mut()))
    }

    /// Rebuilds parameters from `values()` order.
    pub fn set_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.n_params() {
            return Err(Error::LengthMismatch {
                what: "autoencoder parameters",
                expected: self.n_params(),
                got: values.len(),
            });
        }
        for (dst, &src) in self.values_mut().zip(values) {
            *dst = src;
        }
        Ok(())
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            w: self.layers.iter().map(|l| Array2::zeros(l.w.raw_dim())).collect(),
            b: self.layers.iter().map(|l| Array1::zeros(l.b.raw_dim())).collect(),
        }
    }

    fn check_input(&self, x: ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    /// Forward pass keeping what backpropagation needs.
    ///
    /// Dropout hits encoder hidden activations only and rescales the kept
    /// units by `1 / (1 - rate)`.
    pub fn forward_cached(
        &self,
        x: ArrayView2<'_, f64>,
        dropout: f64,
        seed: u64,
    ) -> Result<ForwardCache> {
        self.check_input(x)?;
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::InvalidArgument(format!("dropout rate {dropout}")));
        }
        let mut r = rng(seed);
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut masks = Vec::with_capacity(self.layers.len());
        acts.push(x.to_owned());
        for (l, layer) in self.layers.iter().enumerate() {
            let mut h = acts[l].dot(&layer.w);
            h += &layer.b;
            h.mapv_inplace(|v| layer.act.apply(v));
            let out = l + 1;
            let mask = if dropout > 0.0 && out < self.code_layer {
                let keep = 1.0 / (1.0 - dropout);
                let m = Array2::from_shape_fn(h.raw_dim(), |_| {
                    if r.random::<f64>() < dropout { 0.0 } else { keep }
                });
                h *= &m;
                Some(m)
            } else {
                None
            };
            masks.push(mask);
            acts.push(h);
        }
        Ok(ForwardCache {
            acts,
            masks,
            code_layer: self.code_layer,
        })
    }

    /// Backpropagates gradients given with respect to the code and the
    /// reconstruction. Either may be absent.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        d_code: Option<ArrayView2<'_, f64>>,
        d_output: Option<ArrayView2<'_, f64>>,
    ) -> Gradients {
        let mut grads = self.zero_gradients();
        let n_layers = self.layers.len();
        let rows = cache.acts[0].nrows();
        let mut delta: Array2<f64> = match d_output {
            Some(d) => d.to_owned(),
            None => Array2::zeros((rows, self.layer_sizes[n_layers])),
        };
        for l in (0..n_layers).rev() {
            let out = l + 1;
            if out == self.code_layer {
                if let Some(d) = d_code {
                    delta += &d;
                }
            }
            let layer = &self.layers[l];
            if let Some(m) = &cache.masks[l] {
                delta *= m;
            }
            if layer.act == Activation::Relu {
                // dropped units already carry a zero mask
                delta.zip_mut_with(&cache.acts[out], |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0
                    }
                });
            }
            grads.w[l] = cache.acts[l].t().dot(&delta);
            grads.b[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                delta = delta.dot(&layer.w.t());
            }
        }
        grads
    }

    /// Codes of `x` without dropout.
    pub fn encode(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        let mut h = x.to_owned();
        for layer in &self.layers[..self.code_layer] {
            let mut next = h.dot(&layer.w);
            next += &layer.b;
            next.mapv_inplace(|v| layer.act.apply(v));
            h = next;
        }
        Ok(h)
    }
}

/// Activations of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    pub acts: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
    code_layer: usize,
}

impl ForwardCache {
    pub fn code(&self) -> &Array2<f64> {
        &self.acts[self.code_layer]
    }

    pub fn output(&self) -> &Array2<f64> {
        self.acts.last().expect("at least input")
    }
}

/// Codes and reconstructions of `x`; deterministic for a given seed.
pub fn ae_forward(
    params: &AutoencoderParams,
    x: ArrayView2<'_, f64>,
    dropout: f64,
    seed: u64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let cache = params.forward_cached(x, dropout, seed)?;
    let z = cache.code().clone();
    let out = cache.acts.into_iter().last().expect("output");
    Ok((z, out))
}
