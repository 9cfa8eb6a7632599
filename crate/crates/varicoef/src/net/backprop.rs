//! Reverse accumulation of parameter gradients through the jet
//! propagation recorded in a [`Tape`].
//!
//! Losses enter as cotangents: the partial derivative of the scalar
//! loss with respect to every jet slot (value / first / second, per
//! point). Walking the tape backwards turns those into exact gradients
//! for every weight and bias, including the gating encoders.

use super::jet::{JetBatch, PreTape, Streams, Tape};
use super::{MlpGrad, MlpParams};
use crate::{Error, Result};
use ndarray::{Array2, ArrayView2, Axis, Zip};

/// A scalar loss built from jet outputs on a fixed point batch.
pub trait JetLoss {
    /// Derivative requests the loss needs.
    fn spec(&self) -> super::DerivSpec;
    /// Evaluation points, one column per point.
    fn points(&self) -> ArrayView2<'_, f64>;
    /// Loss value and its cotangent with respect to every jet slot.
    fn eval(&self, jets: &JetBatch) -> (f64, JetBatch);
}

/// Exact loss gradient with respect to every network parameter.
///
/// The returned scalar is the loss value at the current parameters.
pub fn loss_param_grad(
    params: &MlpParams,
    loss: &impl JetLoss,
) -> Result<(f64, MlpGrad)> {
    let spec = loss.spec();
    let (jets, tape) = super::forward_jet_batch(params, loss.points(), &spec)?;
    if let Some(col) = jets.first_non_finite() {
        return Err(Error::NonFinite(format!(
            "network output at batch index {col}"
        )));
    }
    let (value, cotangent) = loss.eval(&jets);
    if !value.is_finite() {
        let col = cotangent.first_non_finite();
        return Err(Error::NonFinite(match col {
            Some(col) => format!("loss (first bad batch index {col})"),
            None => "loss".to_string(),
        }));
    }
    let grad = backprop(params, &tape, &cotangent)?;
    Ok((value, grad))
}

/// Reverse pass: cotangents of the network outputs -> parameter gradient.
pub fn backprop(params: &MlpParams, tape: &Tape, cotangent: &JetBatch) -> Result<MlpGrad> {
    let n_hidden = params.depth();
    let n_coords = tape.spec.coords.len();
    if cotangent.first.len() != n_coords || cotangent.second.len() != n_coords {
        return Err(Error::contract("cotangent stream count mismatch"));
    }

    let mut grad = params.zeros_grad();

    // Adjoint of the network output stage.
    let mut adj = Streams {
        value: cotangent.value.clone(),
        first: cotangent.first.clone(),
        second: tape
            .spec
            .coords
            .iter()
            .enumerate()
            .map(|(j, req)| {
                if req.order == 2 {
                    Some(
                        cotangent.second[j]
                            .clone()
                            .unwrap_or_else(|| Array2::zeros(cotangent.value.dim())),
                    )
                } else {
                    None
                }
            })
            .collect(),
    };

    // Output affine layer.
    adj = affine_backward(
        &params.weights[n_hidden],
        &tape.acts[n_hidden],
        &adj,
        &mut grad.weights[n_hidden],
        &mut grad.biases[n_hidden],
    );

    // Encoder adjoint accumulators (gated nets only).
    let hidden_dim = tape.acts[n_hidden].value.dim();
    let mut enc_adj = tape.enc.as_ref().map(|_| {
        let zero = || Streams {
            value: Array2::zeros(hidden_dim),
            first: (0..n_coords).map(|_| Array2::zeros(hidden_dim)).collect(),
            second: tape
                .spec
                .coords
                .iter()
                .map(|req| (req.order == 2).then(|| Array2::zeros(hidden_dim)))
                .collect(),
        };
        (zero(), zero())
    });

    for l in (0..n_hidden).rev() {
        let gated_layer = tape.enc.is_some() && l > 0;
        let gate_adj = if gated_layer {
            let enc = tape.enc.as_ref().unwrap();
            let (u_adj, v_adj) = enc_adj.as_mut().unwrap();
            gate_combine_backward(&tape.pre[l], &enc.u, &enc.v, &adj, u_adj, v_adj)
        } else {
            adj
        };
        let pre_adj = tanh_backward(&tape.pre[l], &gate_adj);
        adj = affine_backward(
            &params.weights[l],
            &tape.acts[l],
            &pre_adj,
            &mut grad.weights[l],
            &mut grad.biases[l],
        );
    }

    if let (Some(enc), Some((u_adj, v_adj)), Some(ggrad)) =
        (&tape.enc, enc_adj, grad.gating.as_mut())
    {
        let gp = params.gating.as_ref().unwrap();
        let u_pre_adj = tanh_backward(&enc.u_pre, &u_adj);
        affine_backward(
            &gp.u_weight,
            &tape.acts[0],
            &u_pre_adj,
            &mut ggrad.u_weight,
            &mut ggrad.u_bias,
        );
        let v_pre_adj = tanh_backward(&enc.v_pre, &v_adj);
        affine_backward(
            &gp.v_weight,
            &tape.acts[0],
            &v_pre_adj,
            &mut ggrad.v_weight,
            &mut ggrad.v_bias,
        );
    }

    Ok(grad)
}

/// Backward through `z = W a + b` for every stream; accumulates weight
/// and bias gradients and returns the input adjoint.
fn affine_backward(
    weight: &Array2<f64>,
    inputs: &Streams,
    adj: &Streams,
    w_grad: &mut Array2<f64>,
    b_grad: &mut ndarray::Array1<f64>,
) -> Streams {
    *w_grad += &adj.value.dot(&inputs.value.t());
    for j in 0..adj.first.len() {
        *w_grad += &adj.first[j].dot(&inputs.first[j].t());
        if let (Some(s_adj), Some(s_in)) = (&adj.second[j], &inputs.second[j]) {
            *w_grad += &s_adj.dot(&s_in.t());
        }
    }
    *b_grad += &adj.value.sum_axis(Axis(1));
    Streams {
        value: weight.t().dot(&adj.value),
        first: adj.first.iter().map(|m| weight.t().dot(m)).collect(),
        second: adj
            .second
            .iter()
            .map(|m| m.as_ref().map(|m| weight.t().dot(m)))
            .collect(),
    }
}

/// Backward through `a = tanh(z)` with jets
/// `da = p dz`, `dda = p ddz - 2 a p dz^2`, `p = 1 - a^2`.
fn tanh_backward(pre: &PreTape, adj: &Streams) -> Streams {
    let a = &pre.act;
    let mut z_bar = Array2::zeros(a.dim());
    Zip::from(&mut z_bar).and(&adj.value).and(a).for_each(|zb, &ab, &a| {
        *zb = ab * (1.0 - a * a);
    });
    let mut first = Vec::with_capacity(adj.first.len());
    let mut second = Vec::with_capacity(adj.second.len());
    for j in 0..adj.first.len() {
        let dz = &pre.dz[j];
        // d(da)/dz = c1 dz with c1 = -2 a p.
        Zip::from(&mut z_bar)
            .and(&adj.first[j])
            .and(a)
            .and(dz)
            .for_each(|zb, &fb, &a, &dz| {
                let p = 1.0 - a * a;
                *zb += fb * (-2.0 * a * p) * dz;
            });
        let mut dz_bar = Array2::zeros(a.dim());
        Zip::from(&mut dz_bar)
            .and(&adj.first[j])
            .and(a)
            .for_each(|db, &fb, &a| *db = fb * (1.0 - a * a));
        let ddz_bar = match (&adj.second[j], &pre.ddz[j]) {
            (Some(s_bar), Some(ddz)) => {
                // dda = p ddz + c2 dz^2, c2 = -2 a p:
                //   d(dda)/dz  = c1 ddz + c2' dz^2, c2' = -2 p (p - 2 a^2)
                //   d(dda)/ddz = p,  d(dda)/d(dz) = 2 c2 dz.
                Zip::from(&mut z_bar)
                    .and(s_bar)
                    .and(a)
                    .and(dz)
                    .and(ddz)
                    .for_each(|zb, &sb, &a, &dz, &ddz| {
                        let p = 1.0 - a * a;
                        *zb += sb * ((-2.0 * a * p) * ddz - 2.0 * p * (p - 2.0 * a * a) * dz * dz);
                    });
                Zip::from(&mut dz_bar)
                    .and(s_bar)
                    .and(a)
                    .and(dz)
                    .for_each(|db, &sb, &a, &dz| {
                        let p = 1.0 - a * a;
                        *db += sb * (-4.0 * a * p * dz);
                    });
                let mut ddz_bar = Array2::zeros(a.dim());
                Zip::from(&mut ddz_bar)
                    .and(s_bar)
                    .and(a)
                    .for_each(|ddb, &sb, &a| *ddb = sb * (1.0 - a * a));
                Some(ddz_bar)
            }
            _ => None,
        };
        first.push(dz_bar);
        second.push(ddz_bar);
    }
    Streams {
        value: z_bar,
        first,
        second,
    }
}

/// Backward through `h = u + g (v - u)` (per stream, product rule).
/// Returns the gate adjoint; encoder adjoints accumulate in place.
fn gate_combine_backward(
    gate_pre: &PreTape,
    u: &Streams,
    v: &Streams,
    adj: &Streams,
    u_adj: &mut Streams,
    v_adj: &mut Streams,
) -> Streams {
    let g = &gate_pre.act;
    // Recompute the gate jet streams from the saved pre-activations.
    let dg: Vec<Array2<f64>> = gate_pre
        .dz
        .iter()
        .map(|dz| {
            let mut dg = Array2::zeros(g.dim());
            Zip::from(&mut dg).and(g).and(dz).for_each(|dg, &g, &dz| {
                *dg = (1.0 - g * g) * dz;
            });
            dg
        })
        .collect();
    let ddg: Vec<Option<Array2<f64>>> = gate_pre
        .dz
        .iter()
        .zip(&gate_pre.ddz)
        .map(|(dz, ddz)| {
            ddz.as_ref().map(|ddz| {
                let mut ddg = Array2::zeros(g.dim());
                Zip::from(&mut ddg)
                    .and(g)
                    .and(dz)
                    .and(ddz)
                    .for_each(|ddg, &g, &dz, &ddz| {
                        let p = 1.0 - g * g;
                        *ddg = p * ddz - 2.0 * g * p * dz * dz;
                    });
                ddg
            })
        })
        .collect();

    let mut g_bar = Array2::zeros(g.dim());
    Zip::from(&mut g_bar)
        .and(&adj.value)
        .and(&u.value)
        .and(&v.value)
        .for_each(|gb, &hb, &u, &v| *gb = hb * (v - u));
    Zip::from(&mut u_adj.value)
        .and(&adj.value)
        .and(g)
        .for_each(|ua, &hb, &g| *ua += hb * (1.0 - g));
    Zip::from(&mut v_adj.value)
        .and(&adj.value)
        .and(g)
        .for_each(|va, &hb, &g| *va += hb * g);

    let mut g_first = Vec::with_capacity(adj.first.len());
    let mut g_second = Vec::with_capacity(adj.second.len());
    for j in 0..adj.first.len() {
        let fb = &adj.first[j];
        // dh = du + dg (v-u) + g (dv - du)
        Zip::from(&mut g_bar)
            .and(fb)
            .and(&u.first[j])
            .and(&v.first[j])
            .for_each(|gb, &fb, &du, &dv| *gb += fb * (dv - du));
        Zip::from(&mut u_adj.value)
            .and(fb)
            .and(&dg[j])
            .for_each(|ua, &fb, &dg| *ua -= fb * dg);
        Zip::from(&mut v_adj.value)
            .and(fb)
            .and(&dg[j])
            .for_each(|va, &fb, &dg| *va += fb * dg);
        Zip::from(&mut u_adj.first[j])
            .and(fb)
            .and(g)
            .for_each(|ua, &fb, &g| *ua += fb * (1.0 - g));
        Zip::from(&mut v_adj.first[j])
            .and(fb)
            .and(g)
            .for_each(|va, &fb, &g| *va += fb * g);
        let mut dg_bar = Array2::zeros(g.dim());
        Zip::from(&mut dg_bar)
            .and(fb)
            .and(&u.value)
            .and(&v.value)
            .for_each(|db, &fb, &u, &v| *db = fb * (v - u));

        let ddg_bar = adj.second[j].as_ref().map(|sb| {
            let (du, dv) = (&u.first[j], &v.first[j]);
            let (ddu, ddv) = (
                u.second[j].as_ref().expect("stream order mismatch"),
                v.second[j].as_ref().expect("stream order mismatch"),
            );
            let ddg_j = ddg[j].as_ref().expect("stream order mismatch");
            // ddh = ddu + ddg (v-u) + 2 dg (dv-du) + g (ddv-ddu)
            Zip::from(&mut g_bar)
                .and(sb)
                .and(ddu)
                .and(ddv)
                .for_each(|gb, &sb, &ddu, &ddv| *gb += sb * (ddv - ddu));
            Zip::from(&mut u_adj.value)
                .and(sb)
                .and(ddg_j)
                .for_each(|ua, &sb, &ddg| *ua -= sb * ddg);
            Zip::from(&mut v_adj.value)
                .and(sb)
                .and(ddg_j)
                .for_each(|va, &sb, &ddg| *va += sb * ddg);
            Zip::from(&mut dg_bar)
                .and(sb)
                .and(du)
                .and(dv)
                .for_each(|db, &sb, &du, &dv| *db += 2.0 * sb * (dv - du));
            Zip::from(u_adj.first[j].view_mut())
                .and(sb)
                .and(&dg[j])
                .for_each(|ua, &sb, &dg| *ua -= 2.0 * sb * dg);
            Zip::from(v_adj.first[j].view_mut())
                .and(sb)
                .and(&dg[j])
                .for_each(|va, &sb, &dg| *va += 2.0 * sb * dg);
            Zip::from(u_adj.second[j].as_mut().expect("stream order mismatch"))
                .and(sb)
                .and(g)
                .for_each(|ua, &sb, &g| *ua += sb * (1.0 - g));
            Zip::from(v_adj.second[j].as_mut().expect("stream order mismatch"))
                .and(sb)
                .and(g)
                .for_each(|va, &sb, &g| *va += sb * g);
            let mut ddg_bar = Array2::zeros(g.dim());
            Zip::from(&mut ddg_bar)
                .and(sb)
                .and(&u.value)
                .and(&v.value)
                .for_each(|db, &sb, &u, &v| *db = sb * (v - u));
            ddg_bar
        });
        g_first.push(dg_bar);
        g_second.push(ddg_bar);
    }

    Streams {
        value: g_bar,
        first: g_first,
        second: g_second,
    }
}
