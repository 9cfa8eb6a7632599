//! Forward evaluation and univariate 2-jet propagation.
//!
//! A jet stream is carried per requested input coordinate: the first
//! partial always, the pure second partial when `order == 2`. All batch
//! matrices are `(width, n_points)` — one column per point — so layer
//! maps are single GEMMs.

use super::MlpParams;
use crate::{Error, Result};
use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

/// One requested derivative coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoordReq {
    /// Input coordinate index.
    pub coord: usize,
    /// 1 = first partial only, 2 = first and pure second partial.
    pub order: u8,
}

/// Which input coordinates to differentiate along, and to what order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DerivSpec {
    pub coords: Vec<CoordReq>,
}

impl DerivSpec {
    pub fn none() -> Self {
        Self { coords: Vec::new() }
    }

    /// Second-order jets along every listed coordinate.
    pub fn second(coords: &[usize]) -> Self {
        Self {
            coords: coords.iter().map(|&coord| CoordReq { coord, order: 2 }).collect(),
        }
    }

    /// First-order jets along every listed coordinate.
    pub fn first(coords: &[usize]) -> Self {
        Self {
            coords: coords.iter().map(|&coord| CoordReq { coord, order: 1 }).collect(),
        }
    }

    pub fn validate(&self, input_dim: usize) -> Result<()> {
        for req in &self.coords {
            if req.coord >= input_dim {
                return Err(Error::contract(format!(
                    "derivative coordinate {} out of range for input dimension {input_dim}",
                    req.coord
                )));
            }
            if req.order == 0 || req.order > 2 {
                return Err(Error::contract("derivative order must be 1 or 2"));
            }
        }
        Ok(())
    }
}

/// Value and derivatives of one scalar output at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    /// First partials, one per `DerivSpec` coordinate.
    pub first: Vec<f64>,
    /// Pure second partials; `None` for order-1 coordinates.
    pub second: Vec<Option<f64>>,
}

/// Batched jets (or their cotangents): `value` is `(out_dim, n)`, the
/// stream vectors follow the `DerivSpec` coordinate order.
#[derive(Debug, Clone)]
pub struct JetBatch {
    pub value: Array2<f64>,
    pub first: Vec<Array2<f64>>,
    pub second: Vec<Option<Array2<f64>>>,
}

impl JetBatch {
    pub fn zeros_like(other: &JetBatch) -> Self {
        JetBatch {
            value: Array2::zeros(other.value.dim()),
            first: other.first.iter().map(|m| Array2::zeros(m.dim())).collect(),
            second: other
                .second
                .iter()
                .map(|m| m.as_ref().map(|m| Array2::zeros(m.dim())))
                .collect(),
        }
    }

    pub fn n_points(&self) -> usize {
        self.value.ncols()
    }

    /// Extracts the jet of output row `row` at point `col`.
    pub fn jet_at(&self, row: usize, col: usize) -> Jet2 {
        Jet2 {
            value: self.value[(row, col)],
            first: self.first.iter().map(|m| m[(row, col)]).collect(),
            second: self.second.iter().map(|m| m.as_ref().map(|m| m[(row, col)])).collect(),
        }
    }

    /// First column index holding a non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        let scan = |m: &Array2<f64>| -> Option<usize> {
            (0..m.ncols()).find(|&col| m.column(col).iter().any(|x| !x.is_finite()))
        };
        let mut worst: Option<usize> = None;
        let mut consider = |c: Option<usize>| {
            if let Some(c) = c {
                worst = Some(worst.map_or(c, |w| w.min(c)));
            }
        };
        consider(scan(&self.value));
        for m in &self.first {
            consider(scan(m));
        }
        for m in self.second.iter().flatten() {
            consider(scan(m));
        }
        worst
    }
}

/// Per-coordinate streams of one propagation stage.
#[derive(Debug, Clone)]
pub(super) struct Streams {
    pub value: Array2<f64>,
    pub first: Vec<Array2<f64>>,
    pub second: Vec<Option<Array2<f64>>>,
}

impl Streams {
    pub(super) fn seed(inputs: ArrayView2<'_, f64>, spec: &DerivSpec) -> Self {
        let (dim, n) = inputs.dim();
        let mut first = Vec::with_capacity(spec.coords.len());
        let mut second = Vec::with_capacity(spec.coords.len());
        for req in &spec.coords {
            let mut seed = Array2::zeros((dim, n));
            seed.row_mut(req.coord).fill(1.0);
            first.push(seed);
            second.push((req.order == 2).then(|| Array2::zeros((dim, n))));
        }
        Streams {
            value: inputs.to_owned(),
            first,
            second,
        }
    }

    /// Affine map through (weight, bias); bias only touches the value stream.
    pub(super) fn affine(&self, weight: &Array2<f64>, bias: &Array1<f64>) -> Self {
        let mut value = weight.dot(&self.value);
        value += &bias.view().insert_axis(Axis(1));
        Streams {
            value,
            first: self.first.iter().map(|m| weight.dot(m)).collect(),
            second: self
                .second
                .iter()
                .map(|m| m.as_ref().map(|m| weight.dot(m)))
                .collect(),
        }
    }

    /// tanh applied to a pre-activation stage `self`.
    pub(super) fn tanh(&self) -> Self {
        let act = self.value.mapv(f64::tanh);
        let mut first = Vec::with_capacity(self.first.len());
        let mut second = Vec::with_capacity(self.second.len());
        for (dz, ddz) in self.first.iter().zip(&self.second) {
            let mut da = Array2::zeros(dz.dim());
            Zip::from(&mut da).and(&act).and(dz).for_each(|da, &a, &dz| {
                *da = (1.0 - a * a) * dz;
            });
            let dda = ddz.as_ref().map(|ddz| {
                let mut dda = Array2::zeros(ddz.dim());
                Zip::from(&mut dda)
                    .and(&act)
                    .and(dz)
                    .and(ddz)
                    .for_each(|dda, &a, &dz, &ddz| {
                        let p = 1.0 - a * a;
                        *dda = p * ddz - 2.0 * a * p * dz * dz;
                    });
                dda
            });
            first.push(da);
            second.push(dda);
        }
        Streams {
            value: act,
            first,
            second,
        }
    }

    /// Gated update `h = u + g .* (v - u)` with product-rule jets.
    pub(super) fn gate_combine(gate: &Streams, u: &Streams, v: &Streams) -> Self {
        let g = &gate.value;
        let mut value = Array2::zeros(g.dim());
        Zip::from(&mut value)
            .and(g)
            .and(&u.value)
            .and(&v.value)
            .for_each(|h, &g, &u, &v| *h = u + g * (v - u));
        let mut first = Vec::with_capacity(gate.first.len());
        let mut second = Vec::with_capacity(gate.second.len());
        for j in 0..gate.first.len() {
            let (dg, du, dv) = (&gate.first[j], &u.first[j], &v.first[j]);
            let mut dh = Array2::zeros(g.dim());
            Zip::from(&mut dh)
                .and(dg)
                .and(&u.value)
                .and(&v.value)
                .for_each(|dh, &dg, &u, &v| *dh = dg * (v - u));
            Zip::from(&mut dh).and(du).and(dv).and(g).for_each(|dh, &du, &dv, &g| {
                *dh += du + g * (dv - du);
            });
            let ddh = gate.second[j].as_ref().map(|ddg| {
                let (ddu, ddv) = (
                    u.second[j].as_ref().expect("encoder stream order mismatch"),
                    v.second[j].as_ref().expect("encoder stream order mismatch"),
                );
                let mut ddh = Array2::zeros(g.dim());
                Zip::from(&mut ddh)
                    .and(ddg)
                    .and(&u.value)
                    .and(&v.value)
                    .for_each(|ddh, &ddg, &u, &v| *ddh = ddg * (v - u));
                Zip::from(&mut ddh)
                    .and(dg)
                    .and(du)
                    .and(dv)
                    .for_each(|ddh, &dg, &du, &dv| *ddh += 2.0 * dg * (dv - du));
                Zip::from(&mut ddh)
                    .and(g)
                    .and(ddu)
                    .and(ddv)
                    .for_each(|ddh, &g, &ddu, &ddv| *ddh += ddu + g * (ddv - ddu));
                ddh
            });
            first.push(dh);
            second.push(ddh);
        }
        Streams {
            value,
            first,
            second,
        }
    }
}

/// Pre-activation streams of one tanh stage, plus its output value.
pub(super) struct PreTape {
    /// Post-tanh value (hidden activation, or gate value on gated layers).
    pub act: Array2<f64>,
    pub dz: Vec<Array2<f64>>,
    pub ddz: Vec<Option<Array2<f64>>>,
}

pub(super) struct EncTape {
    pub u: Streams,
    pub v: Streams,
    pub u_pre: PreTape,
    pub v_pre: PreTape,
}

/// Saved forward state for reverse accumulation.
///
/// `acts[l]` holds the input streams of affine layer `l` (`acts[0]` is
/// the input batch); `pre[l]` the pre-activation streams of hidden
/// layer `l`'s tanh. Encoder state is kept when gating is present.
pub struct Tape {
    pub(super) spec: DerivSpec,
    pub(super) acts: Vec<Streams>,
    pub(super) pre: Vec<PreTape>,
    pub(super) enc: Option<EncTape>,
}

/// Plain forward pass (values only).
pub fn forward(params: &MlpParams, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (out, _) = forward_jet_batch(params, inputs, &DerivSpec::none())?;
    Ok(out.value)
}

/// Jet propagation for a point batch, also returning the tape needed by
/// reverse accumulation.
pub fn forward_jet_batch(
    params: &MlpParams,
    inputs: ArrayView2<'_, f64>,
    spec: &DerivSpec,
) -> Result<(JetBatch, Tape)> {
    params.validate()?;
    spec.validate(params.input_dim())?;
    if inputs.nrows() != params.input_dim() {
        return Err(Error::contract(format!(
            "input dimension {} does not match layer_widths[0] = {}",
            inputs.nrows(),
            params.input_dim()
        )));
    }
    let n_hidden = params.depth();
    let x = Streams::seed(inputs, spec);

    let enc = params.gating.as_ref().map(|g| {
        let u_z = x.affine(&g.u_weight, &g.u_bias);
        let u = u_z.tanh();
        let v_z = x.affine(&g.v_weight, &g.v_bias);
        let v = v_z.tanh();
        EncTape {
            u_pre: PreTape {
                act: u.value.clone(),
                dz: u_z.first,
                ddz: u_z.second,
            },
            v_pre: PreTape {
                act: v.value.clone(),
                dz: v_z.first,
                ddz: v_z.second,
            },
            u,
            v,
        }
    });

    let mut acts: Vec<Streams> = Vec::with_capacity(n_hidden + 1);
    let mut pre: Vec<PreTape> = Vec::with_capacity(n_hidden);
    acts.push(x);
    for l in 0..n_hidden {
        let z = acts[l].affine(&params.weights[l], &params.biases[l]);
        let a = z.tanh();
        pre.push(PreTape {
            act: a.value.clone(),
            dz: z.first,
            ddz: z.second,
        });
        let next = match &enc {
            // The first hidden state comes straight from the input affine.
            Some(enc) if l > 0 => Streams::gate_combine(&a, &enc.u, &enc.v),
            _ => a,
        };
        acts.push(next);
    }
    let out = acts[n_hidden].affine(&params.weights[n_hidden], &params.biases[n_hidden]);

    let jets = JetBatch {
        value: out.value,
        first: out.first,
        second: out.second,
    };
    let tape = Tape {
        spec: spec.clone(),
        acts,
        pre,
        enc,
    };
    Ok((jets, tape))
}

/// Jets of a scalar-field network at each input point.
pub fn forward_jet(
    params: &MlpParams,
    inputs: ArrayView2<'_, f64>,
    spec: &DerivSpec,
) -> Result<Vec<Jet2>> {
    if params.output_dim() != 1 {
        return Err(Error::contract(
            "forward_jet expects a scalar-field network (output dimension 1)",
        ));
    }
    let (out, _) = forward_jet_batch(params, inputs, spec)?;
    Ok((0..out.n_points()).map(|col| out.jet_at(0, col)).collect())
}

impl MlpParams {
    /// Value-only evaluation; `inputs` is `(input_dim, n)`.
    pub fn forward(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        forward(self, inputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Activation;
    use crate::rng::stream;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;

    fn linear_net(weight: Array2<f64>, bias: Array1<f64>) -> MlpParams {
        let widths = vec![weight.ncols(), weight.nrows()];
        MlpParams {
            layer_widths: widths,
            weights: vec![weight],
            biases: vec![bias],
            activation: Activation::Tanh,
            gating: None,
        }
    }

    #[test]
    fn identity_projection() {
        let p = linear_net(array![[1.0, 0.0], [0.0, 1.0]], array![0.0, 0.0]);
        let out = p.forward(array![[0.3], [-0.1]].view()).unwrap();
        assert_eq!(out, array![[0.3], [-0.1]]);
    }

    #[test]
    fn single_tanh_neuron_at_zero() {
        let p = MlpParams {
            layer_widths: vec![1, 1, 1],
            weights: vec![array![[1.0]], array![[1.0]]],
            biases: vec![array![0.0], array![0.0]],
            activation: Activation::Tanh,
            gating: None,
        };
        let out = p.forward(array![[0.0]].view()).unwrap();
        assert_eq!(out[(0, 0)], 0.0);
    }

    #[test]
    fn dimension_mismatch_is_contract_error() {
        let p = linear_net(array![[1.0, 0.0]], array![0.0]);
        let err = p.forward(array![[1.0], [2.0], [3.0]].view()).unwrap_err();
        assert!(matches!(err, crate::Error::Contract(_)));
    }

    #[test]
    fn tanh_jet_at_zero() {
        // f(x) = tanh(x) via a 1-1-1 net with identity output layer.
        let p = MlpParams {
            layer_widths: vec![1, 1, 1],
            weights: vec![array![[1.0]], array![[1.0]]],
            biases: vec![array![0.0], array![0.0]],
            activation: Activation::Tanh,
            gating: None,
        };
        let jets = forward_jet(&p, array![[0.0]].view(), &DerivSpec::second(&[0])).unwrap();
        assert_abs_diff_eq!(jets[0].value, 0.0);
        assert_abs_diff_eq!(jets[0].first[0], 1.0);
        assert_abs_diff_eq!(jets[0].second[0].unwrap(), 0.0);
    }

    #[test]
    fn linear_function_jets() {
        // f(x, t) = 2x + 3t.
        let p = linear_net(array![[2.0, 3.0]], array![0.0]);
        let pts = array![[0.4, -1.0], [0.7, 2.0]];
        let jets = forward_jet(&p, pts.view(), &DerivSpec::second(&[0, 1])).unwrap();
        for jet in &jets {
            assert_abs_diff_eq!(jet.first[0], 2.0);
            assert_abs_diff_eq!(jet.first[1], 3.0);
            assert_abs_diff_eq!(jet.second[0].unwrap(), 0.0);
            assert_abs_diff_eq!(jet.second[1].unwrap(), 0.0);
        }
    }

    #[test]
    fn value_slot_ignores_derivative_requests() {
        let mut rng = stream(11, "jets");
        for gated in [false, true] {
            let p = MlpParams::glorot(&[2, 8, 8, 1], Activation::Tanh, gated, &mut rng).unwrap();
            let pts = Array2::from_shape_fn((2, 5), |_| rng.gen_range(-1.0..1.0));
            let plain = p.forward(pts.view()).unwrap();
            let (full, _) = forward_jet_batch(&p, pts.view(), &DerivSpec::second(&[0, 1])).unwrap();
            let (first_only, _) = forward_jet_batch(&p, pts.view(), &DerivSpec::first(&[1])).unwrap();
            assert_eq!(plain, full.value);
            assert_eq!(plain, first_only.value);
        }
    }

    /// Straightforward per-point re-evaluation used as an oracle.
    fn naive_forward(p: &MlpParams, x: &[f64]) -> f64 {
        let n_hidden = p.depth();
        let act = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x = x.tanh());
        let affine = |w: &Array2<f64>, b: &Array1<f64>, x: &[f64]| -> Vec<f64> {
            (0..w.nrows())
                .map(|r| (0..w.ncols()).map(|c| w[(r, c)] * x[c]).sum::<f64>() + b[r])
                .collect()
        };
        let (u, v) = match &p.gating {
            Some(g) => {
                let mut u = affine(&g.u_weight, &g.u_bias, x);
                act(&mut u);
                let mut v = affine(&g.v_weight, &g.v_bias, x);
                act(&mut v);
                (u, v)
            }
            None => (Vec::new(), Vec::new()),
        };
        let mut h: Vec<f64> = x.to_vec();
        for l in 0..n_hidden {
            let mut z = affine(&p.weights[l], &p.biases[l], &h);
            act(&mut z);
            h = if p.gating.is_some() && l > 0 {
                z.iter()
                    .zip(u.iter().zip(&v))
                    .map(|(&g, (&u, &v))| u + g * (v - u))
                    .collect()
            } else {
                z
            };
        }
        affine(&p.weights[n_hidden], &p.biases[n_hidden], &h)[0]
    }

    #[test]
    fn forward_matches_independent_reevaluation() {
        let mut rng = stream(12, "jets");
        for gated in [false, true] {
            let p = MlpParams::glorot(&[2, 16, 16, 1], Activation::Tanh, gated, &mut rng).unwrap();
            let pts = Array2::from_shape_fn((2, 20), |_| rng.gen_range(-2.0..2.0));
            let out = p.forward(pts.view()).unwrap();
            for col in 0..pts.ncols() {
                let x = [pts[(0, col)], pts[(1, col)]];
                let expect = naive_forward(&p, &x);
                assert!(
                    (out[(0, col)] - expect).abs() <= 1e-12 * expect.abs().max(1.0),
                    "col {col}: {} vs {expect}",
                    out[(0, col)]
                );
            }
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        let mut rng = stream(13, "jets");
        for gated in [false, true] {
            let p = MlpParams::glorot(&[2, 8, 8, 1], Activation::Tanh, gated, &mut rng).unwrap();
            let spec = DerivSpec::second(&[0, 1]);
            let pts = Array2::from_shape_fn((2, 10), |_| rng.gen_range(-1.5..1.5));
            let jets = forward_jet(&p, pts.view(), &spec).unwrap();
            let h = 1e-4;
            let eval = |x: f64, t: f64| p.forward(array![[x], [t]].view()).unwrap()[(0, 0)];
            for (col, jet) in jets.iter().enumerate() {
                let (x, t) = (pts[(0, col)], pts[(1, col)]);
                let f0 = eval(x, t);
                for (j, (xp, xm)) in [
                    (eval(x + h, t), eval(x - h, t)),
                    (eval(x, t + h), eval(x, t - h)),
                ]
                .into_iter()
                .enumerate()
                {
                    let fd_first = (xp - xm) / (2.0 * h);
                    let fd_second = (xp - 2.0 * f0 + xm) / (h * h);
                    let rel1 = (jet.first[j] - fd_first).abs() / fd_first.abs().max(1e-3);
                    let rel2 =
                        (jet.second[j].unwrap() - fd_second).abs() / fd_second.abs().max(1e-3);
                    assert!(rel1 <= 1e-6, "first[{j}] rel err {rel1}");
                    assert!(rel2 <= 1e-5, "second[{j}] rel err {rel2}");
                }
            }
        }
    }
}
