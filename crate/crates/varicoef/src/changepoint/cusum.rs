//! CUSUM-type change-point baseline.
//!
//! `U_k(a) = (k (n-k) / n)^{1-a} (mean of first k - mean of rest)` for
//! `k = 1..n-1`; the estimate is the argmax of `|U_k|` (smallest index
//! on ties). The exponent `a` lives in `[0, 0.5)`.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CusumConfig {
    pub alpha: f64,
}

impl Default for CusumConfig {
    fn default() -> Self {
        CusumConfig { alpha: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CusumResult {
    pub alpha: f64,
    /// Estimated split: the first segment holds samples `1..=k_hat` (1-based).
    pub k_hat: usize,
    /// `U_k` for `k = 1..n-1` (signed).
    pub profile: Vec<f64>,
    /// Set when the profile is identically zero (constant series).
    pub degenerate: bool,
}

pub fn cusum_detect(series: &[f64], cfg: &CusumConfig) -> Result<CusumResult> {
    let n = series.len();
    if n < 2 {
        return Err(Error::contract("CUSUM needs at least 2 samples"));
    }
    if !(0.0..0.5).contains(&cfg.alpha) {
        return Err(Error::contract("CUSUM exponent must lie in [0, 0.5)"));
    }
    let total: f64 = series.iter().sum();
    let mut prefix = 0.0;
    let mut profile = Vec::with_capacity(n - 1);
    for k in 1..n {
        prefix += series[k - 1];
        let rest = total - prefix;
        let kf = k as f64;
        let nf = n as f64;
        let weight = (kf * (nf - kf) / nf).powf(1.0 - cfg.alpha);
        profile.push(weight * (prefix / kf - rest / (nf - kf)));
    }
    let mut best = (1usize, 0.0f64);
    for (i, &u) in profile.iter().enumerate() {
        if u.abs() > best.1 {
            best = (i + 1, u.abs());
        }
    }
    // A constant series leaves only roundoff in the profile.
    let scale = series.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let degenerate = best.1 <= 1e-10 * scale.max(1e-300) * n as f64;
    Ok(CusumResult {
        alpha: cfg.alpha,
        k_hat: if degenerate { 1 } else { best.0 },
        profile,
        degenerate,
    })
}
