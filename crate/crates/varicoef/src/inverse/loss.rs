//! Pointwise residuals and data losses.

use crate::net::Jet2;
use crate::{Error, Result};

/// Mean squared error between predictions and observations.
pub fn data_mse(predictions: &[f64], observations: &[f64]) -> Result<f64> {
    if predictions.len() != observations.len() {
        return Err(Error::contract("prediction/observation length mismatch"));
    }
    if predictions.is_empty() {
        return Err(Error::contract("empty observation set"));
    }
    let n = predictions.len() as f64;
    Ok(predictions
        .iter()
        .zip(observations)
        .map(|(p, o)| (p - o) * (p - o))
        .sum::<f64>()
        / n)
}

/// `R = u_t - lam1 u u_x - lam2 u_xx` at one point.
pub fn burgers_residual_point(u: f64, u_t: f64, u_x: f64, u_xx: f64, lam1: f64, lam2: f64) -> f64 {
    u_t - lam1 * u * u_x - lam2 * u_xx
}

/// Burgers' residual for jets that carry `(x order 2, t order 1)` and
/// per-point coefficient pairs.
pub fn burgers_residuals(jets: &[Jet2], coeffs: &[(f64, f64)]) -> Result<Vec<f64>> {
    if jets.len() != coeffs.len() {
        return Err(Error::contract("jet/coefficient length mismatch"));
    }
    jets.iter()
        .zip(coeffs)
        .map(|(jet, &(l1, l2))| {
            let u = jet.value;
            let u_x = jet.first[0];
            let u_xx = jet.second[0].ok_or_else(|| {
                Error::contract("Burgers' residual needs the second x-derivative")
            })?;
            let u_t = jet.first[1];
            Ok(burgers_residual_point(u, u_t, u_x, u_xx, l1, l2))
        })
        .collect()
}

/// Acoustic interior residual `alpha^2 (phi_xx + phi_zz) - phi_tt`.
pub fn wave_pde_residual_point(alpha: f64, phi_xx: f64, phi_zz: f64, phi_tt: f64) -> f64 {
    alpha * alpha * (phi_xx + phi_zz) - phi_tt
}

/// Free-surface pressure residual `rho alpha^2 (phi_xx + phi_zz)` at z = 0.
pub fn wave_pc_residual_point(rho: f64, alpha: f64, phi_xx: f64, phi_zz: f64) -> f64 {
    rho * alpha * alpha * (phi_xx + phi_zz)
}

/// Snapshot mismatch `(phi_x - ux_obs, phi_z - uz_obs)`.
pub fn wave_snapshot_residual_point(
    phi_x: f64,
    phi_z: f64,
    ux_obs: f64,
    uz_obs: f64,
) -> (f64, f64) {
    (phi_x - ux_obs, phi_z - uz_obs)
}

/// Trace mismatch `phi_z - uz_obs` at a surface receiver.
pub fn wave_trace_residual_point(phi_z: f64, uz_obs: f64) -> f64 {
    phi_z - uz_obs
}
