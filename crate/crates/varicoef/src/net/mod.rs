//! Dense scalar-field networks with exact derivatives.
//!
//! Two architectures share one parameter container:
//!
//! * a plain tanh MLP, and
//! * the gated variant with two input encoders `U`, `V` and per-layer
//!   update `H <- (1-Z) .* U + Z .* V`, where `Z` is the
//!   affine-plus-tanh of the previous hidden state.
//!
//! Evaluation works on point batches (one column per point). Besides
//! plain values, [`forward_jet`] propagates univariate 2-jets per
//! requested input coordinate (value, first partial, pure second
//! partial — mixed partials are never needed here), and
//! [`loss_param_grad`] accumulates exact loss gradients with respect to
//! every weight and bias in reverse through the same propagation.

mod backprop;
mod checkpoint;
mod gradcheck;
mod jet;

pub use backprop::{backprop, loss_param_grad, JetLoss};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use gradcheck::grad_check;
pub use jet::{forward, forward_jet, forward_jet_batch, CoordReq, DerivSpec, Jet2, JetBatch, Tape};

use crate::{Error, Result};
use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Elementwise activation. Only `tanh` is supported; residual losses
/// need two derivatives and tanh keeps them cheap and smooth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Tanh,
}

/// Encoder pair for the gated architecture. Both map the input
/// dimension to the hidden width.
#[derive(Debug, Clone, PartialEq)]
pub struct Gating {
    pub u_weight: Array2<f64>,
    pub u_bias: Array1<f64>,
    pub v_weight: Array2<f64>,
    pub v_bias: Array1<f64>,
}

/// Parameters of one network.
///
/// `layer_widths` is `[input, hidden..., output]`; `weights[l]` has
/// shape `(layer_widths[l+1], layer_widths[l])`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layer_widths: Vec<usize>,
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub activation: Activation,
    pub gating: Option<Gating>,
}

/// Loss gradient shaped like [`MlpParams`].
#[derive(Debug, Clone)]
pub struct MlpGrad {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub gating: Option<Gating>,
}

impl MlpParams {
    /// Glorot-uniform initialization (biases zero), deterministic under the caller's RNG.
    pub fn glorot<R: Rng>(
        layer_widths: &[usize],
        activation: Activation,
        gated: bool,
        rng: &mut R,
    ) -> Result<Self> {
        if layer_widths.len() < 2 {
            return Err(Error::contract("need at least input and output widths"));
        }
        if layer_widths.iter().any(|&w| w == 0) {
            return Err(Error::contract("zero layer width"));
        }
        let glorot_mat = |rows: usize, cols: usize, rng: &mut R| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-limit..limit))
        };
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..layer_widths.len() - 1 {
            weights.push(glorot_mat(layer_widths[l + 1], layer_widths[l], rng));
            biases.push(Array1::zeros(layer_widths[l + 1]));
        }
        let gating = if gated {
            if layer_widths.len() < 3 {
                return Err(Error::contract("gated networks need at least one hidden layer"));
            }
            let d_in = layer_widths[0];
            let hidden = layer_widths[1];
            if layer_widths[1..layer_widths.len() - 1]
                .iter()
                .any(|&w| w != hidden)
            {
                return Err(Error::contract("gated networks need uniform hidden widths"));
            }
            Some(Gating {
                u_weight: glorot_mat(hidden, d_in, rng),
                u_bias: Array1::zeros(hidden),
                v_weight: glorot_mat(hidden, d_in, rng),
                v_bias: Array1::zeros(hidden),
            })
        } else {
            None
        };
        let params = MlpParams {
            layer_widths: layer_widths.to_vec(),
            weights,
            biases,
            activation,
            gating,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    /// Number of hidden layers.
    pub fn depth(&self) -> usize {
        self.layer_widths.len() - 2
    }

    /// Checks shape chaining, gating shapes and finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.layer_widths.len() - 1 || self.biases.len() != self.weights.len()
        {
            return Err(Error::contract("layer count mismatch"));
        }
        for l in 0..self.weights.len() {
            let (rows, cols) = self.weights[l].dim();
            if rows != self.layer_widths[l + 1] || cols != self.layer_widths[l] {
                return Err(Error::contract(format!(
                    "weight {l} has shape ({rows},{cols}), expected ({},{})",
                    self.layer_widths[l + 1],
                    self.layer_widths[l]
                )));
            }
            if self.biases[l].len() != rows {
                return Err(Error::contract(format!("bias {l} length mismatch")));
            }
        }
        if let Some(g) = &self.gating {
            if self.layer_widths.len() < 3 {
                return Err(Error::contract("gated networks need at least one hidden layer"));
            }
            let d_in = self.input_dim();
            let hidden = self.layer_widths[1];
            if self.layer_widths[1..self.layer_widths.len() - 1]
                .iter()
                .any(|&w| w != hidden)
            {
                return Err(Error::contract("gated networks need uniform hidden widths"));
            }
            for (name, w, b) in [
                ("u", &g.u_weight, &g.u_bias),
                ("v", &g.v_weight, &g.v_bias),
            ] {
                if w.dim() != (hidden, d_in) || b.len() != hidden {
                    return Err(Error::contract(format!("encoder {name} shape mismatch")));
                }
            }
        }
        let finite = self
            .weights
            .iter()
            .all(|w| w.iter().all(|x| x.is_finite()))
            && self.biases.iter().all(|b| b.iter().all(|x| x.is_finite()))
            && self.gating.as_ref().map_or(true, |g| {
                [&g.u_weight, &g.v_weight]
                    .iter()
                    .all(|w| w.iter().all(|x| x.is_finite()))
                    && [&g.u_bias, &g.v_bias]
                        .iter()
                        .all(|b| b.iter().all(|x| x.is_finite()))
            });
        if !finite {
            return Err(Error::NonFinite("network parameter".into()));
        }
        Ok(())
    }

    pub fn zeros_grad(&self) -> MlpGrad {
        MlpGrad {
            weights: self.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
            biases: self.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            gating: self.gating.as_ref().map(|g| Gating {
                u_weight: Array2::zeros(g.u_weight.dim()),
                u_bias: Array1::zeros(g.u_bias.len()),
                v_weight: Array2::zeros(g.v_weight.dim()),
                v_bias: Array1::zeros(g.v_bias.len()),
            }),
        }
    }

    pub fn n_params(&self) -> usize {
        let mut n = 0;
        if let Some(g) = &self.gating {
            n += 2 * (g.u_weight.len() + g.u_bias.len());
        }
        for l in 0..self.weights.len() {
            n += self.weights[l].len() + self.biases[l].len();
        }
        n
    }

    /// Flattens all parameters into one vector. Order: gating encoders
    /// (u weight row-major, u bias, v weight, v bias) when present, then
    /// per layer weight row-major followed by bias.
    pub fn flatten(&self) -> Array1<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        if let Some(g) = &self.gating {
            out.extend(g.u_weight.iter());
            out.extend(g.u_bias.iter());
            out.extend(g.v_weight.iter());
            out.extend(g.v_bias.iter());
        }
        for l in 0..self.weights.len() {
            out.extend(self.weights[l].iter());
            out.extend(self.biases[l].iter());
        }
        Array1::from_vec(out)
    }

    /// Writes a flat vector (same order as [`flatten`](Self::flatten)) back into the structure.
    pub fn assign_flat(&mut self, flat: &Array1<f64>) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::contract(format!(
                "flat vector has {} entries, expected {}",
                flat.len(),
                self.n_params()
            )));
        }
        let mut pos = 0;
        let take = |dst: &mut [f64], pos: &mut usize| {
            dst.copy_from_slice(&flat.as_slice().unwrap()[*pos..*pos + dst.len()]);
            *pos += dst.len();
        };
        if let Some(g) = &mut self.gating {
            take(g.u_weight.as_slice_mut().unwrap(), &mut pos);
            take(g.u_bias.as_slice_mut().unwrap(), &mut pos);
            take(g.v_weight.as_slice_mut().unwrap(), &mut pos);
            take(g.v_bias.as_slice_mut().unwrap(), &mut pos);
        }
        for l in 0..self.weights.len() {
            let (w, b) = (&mut self.weights[l], &mut self.biases[l]);
            take(w.as_slice_mut().unwrap(), &mut pos);
            take(b.as_slice_mut().unwrap(), &mut pos);
        }
        Ok(())
    }
}

impl MlpGrad {
    /// Flat view in the same order as [`MlpParams::flatten`].
    pub fn flatten(&self) -> Array1<f64> {
        let mut out = Vec::new();
        if let Some(g) = &self.gating {
            out.extend(g.u_weight.iter());
            out.extend(g.u_bias.iter());
            out.extend(g.v_weight.iter());
            out.extend(g.v_bias.iter());
        }
        for l in 0..self.weights.len() {
            out.extend(self.weights[l].iter());
            out.extend(self.biases[l].iter());
        }
        Array1::from_vec(out)
    }

    pub fn add_assign(&mut self, other: &MlpGrad) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
        if let (Some(a), Some(b)) = (&mut self.gating, &other.gating) {
            a.u_weight += &b.u_weight;
            a.u_bias += &b.u_bias;
            a.v_weight += &b.v_weight;
            a.v_bias += &b.v_bias;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            *w *= factor;
        }
        for b in &mut self.biases {
            *b *= factor;
        }
        if let Some(g) = &mut self.gating {
            g.u_weight *= factor;
            g.u_bias *= factor;
            g.v_weight *= factor;
            g.v_bias *= factor;
        }
    }
}
