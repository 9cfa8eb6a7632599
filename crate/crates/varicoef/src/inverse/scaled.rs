//! Networks with fixed affine input normalization.
//!
//! Physical coordinates are mapped to `[-1, 1]` per input before the
//! network sees them; jets and cotangents are converted between
//! physical and normalized units by the chain-rule factors, so callers
//! work purely in physical units.

use crate::net::{forward_jet_batch, DerivSpec, JetBatch, MlpGrad, MlpParams, Tape};
use crate::Result;
use ndarray::{Array2, ArrayView2};

/// Per-coordinate affine map `xi = (x - offset) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct InputScaling {
    pub offset: Vec<f64>,
    pub scale: Vec<f64>,
}

impl InputScaling {
    /// Maps each `[lo, hi]` range onto `[-1, 1]`.
    pub fn from_ranges(ranges: &[(f64, f64)]) -> Self {
        let offset = ranges.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        let scale = ranges
            .iter()
            .map(|(lo, hi)| (0.5 * (hi - lo)).max(f64::MIN_POSITIVE))
            .collect();
        InputScaling { offset, scale }
    }

    pub fn identity(dim: usize) -> Self {
        InputScaling {
            offset: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    fn normalize(&self, phys: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = phys.to_owned();
        for (row, (o, s)) in self.offset.iter().zip(&self.scale).enumerate() {
            out.row_mut(row).mapv_inplace(|x| (x - o) / s);
        }
        out
    }
}

/// A network plus its input normalization.
#[derive(Debug, Clone)]
pub struct ScaledNet {
    pub params: MlpParams,
    pub scaling: InputScaling,
}

impl ScaledNet {
    pub fn new(params: MlpParams, scaling: InputScaling) -> Self {
        ScaledNet { params, scaling }
    }

    /// Values at physical points, `(out_dim, n)`.
    pub fn forward(&self, phys: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let xi = self.scaling.normalize(phys);
        self.params.forward(xi.view())
    }

    /// Jets in physical units (first and second derivatives already
    /// divided by the scale factors), plus the tape for backprop.
    pub fn forward_jet_batch(
        &self,
        phys: ArrayView2<'_, f64>,
        spec: &DerivSpec,
    ) -> Result<(JetBatch, Tape)> {
        let xi = self.scaling.normalize(phys);
        let (mut jets, tape) = forward_jet_batch(&self.params, xi.view(), spec)?;
        for (j, req) in spec.coords.iter().enumerate() {
            let s = self.scaling.scale[req.coord];
            jets.first[j] /= s;
            if let Some(second) = &mut jets.second[j] {
                *second /= s * s;
            }
        }
        Ok((jets, tape))
    }

    /// Parameter gradient from a cotangent expressed in physical units.
    pub fn backprop(&self, tape: &Tape, cot_phys: &JetBatch, spec: &DerivSpec) -> Result<MlpGrad> {
        let mut cot = cot_phys.clone();
        for (j, req) in spec.coords.iter().enumerate() {
            let s = self.scaling.scale[req.coord];
            cot.first[j] /= s;
            if let Some(second) = &mut cot.second[j] {
                *second /= s * s;
            }
        }
        crate::net::backprop(&self.params, tape, &cot)
    }
}

/// Numerically stable softplus and its derivative (the logistic).
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
