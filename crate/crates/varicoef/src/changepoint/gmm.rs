//! Gaussian mixture fitting by EM, with BIC model selection.

use crate::rng::stream;
use crate::{Error, Result};
use ndarray::{Array2, ArrayView2};
use rand::Rng;

/// Fitted K-component Gaussian mixture over d-dimensional samples.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmModel {
    pub k: usize,
    pub d: usize,
    /// Component means, `k` rows of length `d`.
    pub means: Vec<Vec<f64>>,
    /// Component covariances, row-major `d x d` each (a single variance
    /// when `d == 1`).
    pub covs: Vec<Vec<f64>>,
    /// Mixture proportions on the simplex.
    pub proportions: Vec<f64>,
    /// Log-likelihood after each EM iteration (non-decreasing).
    pub loglik_trace: Vec<f64>,
}

/// Smallest allowed diagonal covariance entry; keeps near-duplicate
/// inferred values from collapsing a component.
pub const VARIANCE_FLOOR: f64 = 1e-10;

/// How the EM iteration is seeded.
#[derive(Debug, Clone)]
pub enum GmmInit {
    /// k-means++-style seeding of the means, global variance, uniform
    /// proportions; best of `restarts` runs by final log-likelihood.
    KmeansPlusPlus { restarts: usize },
    /// Explicit starting model (single run).
    Explicit(Box<GmmModel>),
}

impl Default for GmmInit {
    fn default() -> Self {
        GmmInit::KmeansPlusPlus { restarts: 8 }
    }
}

impl GmmModel {
    /// Cholesky factor of one covariance (lower triangular, row-major).
    fn chol(&self, comp: usize) -> Result<Vec<f64>> {
        cholesky(&self.covs[comp], self.d)
    }

    /// Log density of one component at `y`.
    pub fn log_component_density(&self, comp: usize, y: &[f64]) -> f64 {
        let d = self.d;
        let l = match self.chol(comp) {
            Ok(l) => l,
            Err(_) => return f64::NEG_INFINITY,
        };
        // Solve L w = (y - mu); quadform = |w|^2, logdet = 2 sum ln L_ii.
        let mut w = vec![0.0; d];
        for i in 0..d {
            let mut s = y[i] - self.means[comp][i];
            for j in 0..i {
                s -= l[i * d + j] * w[j];
            }
            w[i] = s / l[i * d + i];
        }
        let quad: f64 = w.iter().map(|x| x * x).sum();
        let logdet: f64 = (0..d).map(|i| l[i * d + i].ln()).sum::<f64>() * 2.0;
        -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + quad)
    }

    /// Log joint densities `ln(pi_k f_k(y))` for one sample.
    fn log_joint(&self, y: &[f64], out: &mut [f64]) {
        for k in 0..self.k {
            out[k] = self.proportions[k].max(1e-300).ln() + self.log_component_density(k, y);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.means.len() != self.k || self.covs.len() != self.k || self.proportions.len() != self.k
        {
            return Err(Error::contract("component count mismatch"));
        }
        let sum: f64 = self.proportions.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || self.proportions.iter().any(|&p| p < 0.0) {
            return Err(Error::contract("proportions must form a simplex"));
        }
        for k in 0..self.k {
            cholesky(&self.covs[k], self.d)
                .map_err(|_| Error::contract(format!("covariance {k} not positive definite")))?;
        }
        Ok(())
    }
}

fn cholesky(cov: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = cov[i * d + j];
            for p in 0..j {
                s -= l[i * d + p] * l[j * d + p];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::contract("matrix not positive definite"));
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Ok(l)
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Posterior component probabilities, one row per sample (log-sum-exp
/// stabilized Bayes rule).
pub fn responsibilities(model: &GmmModel, samples: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if samples.ncols() != model.d {
        return Err(Error::contract(format!(
            "samples have dimension {}, model has {}",
            samples.ncols(),
            model.d
        )));
    }
    let n = samples.nrows();
    let mut out = Array2::zeros((n, model.k));
    let mut joint = vec![0.0; model.k];
    for i in 0..n {
        let y: Vec<f64> = samples.row(i).to_vec();
        model.log_joint(&y, &mut joint);
        let norm = log_sum_exp(&joint);
        for k in 0..model.k {
            out[(i, k)] = (joint[k] - norm).exp();
        }
    }
    Ok(out)
}

fn global_moments(samples: ArrayView2<'_, f64>, weights: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = samples.dim();
    let w_total: f64 = match weights {
        Some(w) => w.iter().sum(),
        None => n as f64,
    };
    let wi = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut mean = vec![0.0; d];
    for i in 0..n {
        for j in 0..d {
            mean[j] += wi(i) * samples[(i, j)];
        }
    }
    mean.iter_mut().for_each(|m| *m /= w_total);
    let mut cov = vec![0.0; d * d];
    for i in 0..n {
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] += wi(i) * (samples[(i, a)] - mean[a]) * (samples[(i, b)] - mean[b]);
            }
        }
    }
    cov.iter_mut().for_each(|c| *c /= w_total);
    for a in 0..d {
        cov[a * d + a] = cov[a * d + a].max(VARIANCE_FLOOR);
    }
    (mean, cov)
}

fn kmeans_pp_seed<R: Rng>(
    samples: ArrayView2<'_, f64>,
    k: usize,
    rng: &mut R,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (n, d) = samples.dim();
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(k);
    means.push(samples.row(rng.gen_range(0..n)).to_vec());
    let mut min_d2 = vec![0.0f64; n];
    while means.len() < k {
        let mut total = 0.0;
        for i in 0..n {
            let mut best = f64::INFINITY;
            for m in &means {
                let d2: f64 = (0..d).map(|j| (samples[(i, j)] - m[j]).powi(2)).sum();
                best = best.min(d2);
            }
            min_d2[i] = best;
            total += best;
        }
        let next = if total <= 0.0 {
            rng.gen_range(0..n)
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut pick = n - 1;
            for (i, &d2) in min_d2.iter().enumerate() {
                if target < d2 {
                    pick = i;
                    break;
                }
                target -= d2;
            }
            pick
        };
        means.push(samples.row(next).to_vec());
    }
    let (_, cov) = global_moments(samples, None);
    (means, cov)
}

/// Farthest sample from all current means (used to revive empty components).
fn farthest_sample(samples: ArrayView2<'_, f64>, means: &[Vec<f64>]) -> Vec<f64> {
    let (n, d) = samples.dim();
    let mut best = (0usize, -1.0f64);
    for i in 0..n {
        let mut nearest = f64::INFINITY;
        for m in means {
            let d2: f64 = (0..d).map(|j| (samples[(i, j)] - m[j]).powi(2)).sum();
            nearest = nearest.min(d2);
        }
        if nearest > best.1 {
            best = (i, nearest);
        }
    }
    samples.row(best.0).to_vec()
}

/// Fits a K-component mixture, alternating responsibilities and the
/// closed-form parameter updates until the log-likelihood change drops
/// below `tol` or `max_iter` is reached. `KmeansPlusPlus` inits return
/// the best of `restarts` seeded runs.
pub fn em_fit(
    samples: ArrayView2<'_, f64>,
    k: usize,
    init: &GmmInit,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<GmmModel> {
    em_fit_weighted(samples, None, k, init, tol, max_iter, seed)
}

/// 1D convenience wrapper.
pub fn em_fit_1d(
    samples: &[f64],
    k: usize,
    init: &GmmInit,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<GmmModel> {
    let view = ArrayView2::from_shape((samples.len(), 1), samples)
        .map_err(|e| Error::contract(e.to_string()))?;
    em_fit(view, k, init, tol, max_iter, seed)
}

/// Weighted EM (weights >= 0, used by the coordinate-space mixture mode).
pub fn em_fit_weighted(
    samples: ArrayView2<'_, f64>,
    weights: Option<&[f64]>,
    k: usize,
    init: &GmmInit,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<GmmModel> {
    let (n, _d) = samples.dim();
    if k == 0 {
        return Err(Error::contract("need at least one component"));
    }
    if n < k {
        return Err(Error::contract(format!("{n} samples cannot support {k} components")));
    }
    if let Some(w) = weights {
        if w.len() != n || w.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::contract("weights must be nonnegative, one per sample"));
        }
    }
    match init {
        GmmInit::Explicit(model) => em_run(samples, weights, (**model).clone(), tol, max_iter),
        GmmInit::KmeansPlusPlus { restarts } => {
            let restarts = (*restarts).max(1);
            let mut best: Option<GmmModel> = None;
            for r in 0..restarts {
                let mut rng = stream(seed, &format!("em-restart-{r}"));
                let (means, cov) = kmeans_pp_seed(samples, k, &mut rng);
                let start = GmmModel {
                    k,
                    d: samples.ncols(),
                    means,
                    covs: vec![cov.clone(); k],
                    proportions: vec![1.0 / k as f64; k],
                    loglik_trace: Vec::new(),
                };
                let fitted = em_run(samples, weights, start, tol, max_iter)?;
                let better = match &best {
                    None => true,
                    Some(b) => {
                        fitted.loglik_trace.last().unwrap() > b.loglik_trace.last().unwrap()
                    }
                };
                if better {
                    best = Some(fitted);
                }
            }
            Ok(best.unwrap())
        }
    }
}

fn em_run(
    samples: ArrayView2<'_, f64>,
    weights: Option<&[f64]>,
    mut model: GmmModel,
    tol: f64,
    max_iter: usize,
) -> Result<GmmModel> {
    let (n, d) = samples.dim();
    let wi = |i: usize| weights.map_or(1.0, |w| w[i]);
    let w_total: f64 = match weights {
        Some(w) => w.iter().sum(),
        None => n as f64,
    };
    model.loglik_trace.clear();
    let mut revive_count = 0usize;
    let mut joint = vec![0.0; model.k];
    let mut resp = Array2::<f64>::zeros((n, model.k));
    for _iter in 0..max_iter {
        // E step.
        let mut loglik = 0.0;
        for i in 0..n {
            let y: Vec<f64> = samples.row(i).to_vec();
            model.log_joint(&y, &mut joint);
            let norm = log_sum_exp(&joint);
            loglik += wi(i) * norm;
            for k in 0..model.k {
                resp[(i, k)] = (joint[k] - norm).exp();
            }
        }
        model.loglik_trace.push(loglik);

        // M step.
        let mut needs_revive = Vec::new();
        for k in 0..model.k {
            let nk: f64 = (0..n).map(|i| wi(i) * resp[(i, k)]).sum();
            if nk < 1e-12 {
                needs_revive.push(k);
                continue;
            }
            let mut mean = vec![0.0; d];
            for i in 0..n {
                let g = wi(i) * resp[(i, k)];
                for j in 0..d {
                    mean[j] += g * samples[(i, j)];
                }
            }
            mean.iter_mut().for_each(|m| *m /= nk);
            let mut cov = vec![0.0; d * d];
            for i in 0..n {
                let g = wi(i) * resp[(i, k)];
                for a in 0..d {
                    for b in 0..d {
                        cov[a * d + b] +=
                            g * (samples[(i, a)] - mean[a]) * (samples[(i, b)] - mean[b]);
                    }
                }
            }
            cov.iter_mut().for_each(|c| *c /= nk);
            for a in 0..d {
                cov[a * d + a] = cov[a * d + a].max(VARIANCE_FLOOR);
            }
            model.means[k] = mean;
            model.covs[k] = cov;
            model.proportions[k] = nk / w_total;
        }
        if !needs_revive.is_empty() {
            revive_count += needs_revive.len();
            if revive_count > 3 * model.k {
                return Err(Error::Em(format!(
                    "components kept collapsing ({revive_count} revivals)"
                )));
            }
            let (_, gcov) = global_moments(samples, weights);
            for k in needs_revive {
                model.means[k] = farthest_sample(samples, &model.means);
                model.covs[k] = gcov.clone();
                model.proportions[k] = 1.0 / model.k as f64;
            }
        }
        let total: f64 = model.proportions.iter().sum();
        model.proportions.iter_mut().for_each(|p| *p /= total);

        if model.loglik_trace.len() >= 2 {
            let m = model.loglik_trace.len();
            if (model.loglik_trace[m - 1] - model.loglik_trace[m - 2]).abs() < tol {
                break;
            }
        }
    }
    Ok(model)
}

/// Fits `K = 1..k_max` and returns the BIC-minimizing component count
/// (ties toward the smaller K) with all scores.
///
/// Fits with a component whose mixture proportion falls below
/// `min_proportion` are rejected: a coefficient state must carry real
/// mass, and a micro-component chasing a handful of transition samples
/// would otherwise leak small responsibilities across whole plateaus.
/// Fits with a variance pinned at the floor are rejected for the same
/// reason (the likelihood diverges on near-duplicates).
pub fn select_k(
    samples: ArrayView2<'_, f64>,
    k_max: usize,
    min_proportion: f64,
    seed: u64,
) -> Result<(usize, Vec<(usize, f64)>)> {
    if k_max == 0 {
        return Err(Error::contract("k_max must be at least 1"));
    }
    let n = samples.nrows();
    let d = samples.ncols();
    let mut scores = Vec::new();
    let mut best = (1usize, f64::INFINITY);
    for k in 1..=k_max.min(n) {
        let model = em_fit(samples, k, &GmmInit::default(), 1e-8, 500, seed)?;
        let singular = model
            .covs
            .iter()
            .any(|c| (0..d).any(|a| c[a * d + a] <= VARIANCE_FLOOR * (1.0 + 1e-9)));
        let negligible = model.proportions.iter().any(|&p| p < min_proportion);
        let bic = if (singular || negligible) && k > 1 {
            f64::INFINITY
        } else {
            let ll = *model.loglik_trace.last().unwrap();
            let p = (k - 1) + k * d + k * d * (d + 1) / 2;
            -2.0 * ll + p as f64 * (n as f64).ln()
        };
        scores.push((k, bic));
        if bic < best.1 - 1e-12 {
            best = (k, bic);
        }
    }
    Ok((best.0, scores))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn two_cluster_samples(seed: u64) -> Vec<f64> {
        let mut rng = stream(seed, "gmm-test");
        let a = Normal::new(0.5, 0.02).unwrap();
        let b = Normal::new(1.0, 0.02).unwrap();
        let mut out: Vec<f64> = (0..128).map(|_| a.sample(&mut rng)).collect();
        out.extend((0..128).map(|_| b.sample(&mut rng)));
        out
    }

    #[test]
    fn single_component_closed_form() {
        let samples = vec![1.0, 2.0, 3.0, 6.0];
        let model = em_fit_1d(&samples, 1, &GmmInit::default(), 1e-10, 100, 7).unwrap();
        let mean = 3.0;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        assert!((model.means[0][0] - mean).abs() < 1e-12);
        assert!((model.covs[0][0] - var).abs() < 1e-12);
        assert!((model.proportions[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn recovers_two_separated_components() {
        let samples = two_cluster_samples(1);
        let model = em_fit_1d(&samples, 2, &GmmInit::default(), 1e-8, 500, 3).unwrap();
        let mut means: Vec<f64> = model.means.iter().map(|m| m[0]).collect();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((means[0] - 0.5).abs() < 0.005, "means {means:?}");
        assert!((means[1] - 1.0).abs() < 0.005, "means {means:?}");
        // Monotone log-likelihood.
        for w in model.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "loglik decreased: {w:?}");
        }
    }

    #[test]
    fn duplicated_samples_leave_fit_unchanged() {
        let samples = two_cluster_samples(2);
        let mut doubled = samples.clone();
        doubled.extend_from_slice(&samples);
        let init = GmmInit::Explicit(Box::new(GmmModel {
            k: 2,
            d: 1,
            means: vec![vec![0.4], vec![1.1]],
            covs: vec![vec![0.01], vec![0.01]],
            proportions: vec![0.5, 0.5],
            loglik_trace: Vec::new(),
        }));
        let a = em_fit_1d(&samples, 2, &init, 1e-10, 300, 0).unwrap();
        let b = em_fit_1d(&doubled, 2, &init, 1e-10, 300, 0).unwrap();
        for k in 0..2 {
            assert!((a.means[k][0] - b.means[k][0]).abs() < 1e-10);
            assert!((a.covs[k][0] - b.covs[k][0]).abs() < 1e-10);
            assert!((a.proportions[k] - b.proportions[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn responsibilities_bayes_rule_oracle() {
        let mut rng = stream(5, "resp");
        let model = GmmModel {
            k: 3,
            d: 1,
            means: vec![vec![0.0], vec![1.0], vec![2.5]],
            covs: vec![vec![0.3], vec![0.2], vec![0.5]],
            proportions: vec![0.5, 0.3, 0.2],
            loglik_trace: Vec::new(),
        };
        let samples: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..3.0)).collect();
        let view = ArrayView2::from_shape((5, 1), &samples).unwrap();
        let resp = responsibilities(&model, view).unwrap();
        // Naive density-ratio evaluation.
        let pdf = |y: f64, mu: f64, var: f64| {
            (-(y - mu) * (y - mu) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
        };
        for (i, &y) in samples.iter().enumerate() {
            let dens: Vec<f64> = (0..3)
                .map(|k| model.proportions[k] * pdf(y, model.means[k][0], model.covs[k][0]))
                .collect();
            let total: f64 = dens.iter().sum();
            let mut row_sum = 0.0;
            for k in 0..3 {
                assert!((resp[(i, k)] - dens[k] / total).abs() <= 1e-12);
                row_sum += resp[(i, k)];
            }
            assert!((row_sum - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn single_component_responsibilities_are_one() {
        let model = GmmModel {
            k: 1,
            d: 1,
            means: vec![vec![0.3]],
            covs: vec![vec![0.1]],
            proportions: vec![1.0],
            loglik_trace: Vec::new(),
        };
        let samples = [0.1, 0.5, 9.0];
        let view = ArrayView2::from_shape((3, 1), &samples).unwrap();
        let resp = responsibilities(&model, view).unwrap();
        assert!(resp.iter().all(|&g| g == 1.0));
    }

    #[test]
    fn midpoint_sample_splits_evenly() {
        let model = GmmModel {
            k: 2,
            d: 1,
            means: vec![vec![0.0], vec![2.0]],
            covs: vec![vec![0.25], vec![0.25]],
            proportions: vec![0.5, 0.5],
            loglik_trace: Vec::new(),
        };
        let samples = [1.0];
        let view = ArrayView2::from_shape((1, 1), &samples).unwrap();
        let resp = responsibilities(&model, view).unwrap();
        assert!((resp[(0, 0)] - 0.5).abs() < 1e-15);
        assert!((resp[(0, 1)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bic_prefers_true_component_count() {
        let tight: Vec<f64> = {
            let mut rng = stream(6, "bic");
            let n = Normal::new(0.0, 0.05).unwrap();
            (0..200).map(|_| n.sample(&mut rng)).collect()
        };
        let view = ArrayView2::from_shape((tight.len(), 1), &tight).unwrap();
        let (k, _) = select_k(view, 4, 0.02, 11).unwrap();
        assert_eq!(k, 1);

        let two = two_cluster_samples(7);
        let view = ArrayView2::from_shape((two.len(), 1), &two).unwrap();
        let (k, scores) = select_k(view, 5, 0.02, 11).unwrap();
        assert_eq!(k, 2, "scores {scores:?}");
    }

    #[test]
    fn tiny_sample_penalty_dominates() {
        let samples = [0.0, 0.4, 1.0];
        let view = ArrayView2::from_shape((3, 1), &samples).unwrap();
        let (k, _) = select_k(view, 3, 0.02, 2).unwrap();
        assert_eq!(k, 1);
    }

    #[test]
    fn affine_rescaling_leaves_responsibilities_unchanged() {
        let samples = two_cluster_samples(9);
        let init = |mu: [f64; 2], var: f64| {
            GmmInit::Explicit(Box::new(GmmModel {
                k: 2,
                d: 1,
                means: vec![vec![mu[0]], vec![mu[1]]],
                covs: vec![vec![var], vec![var]],
                proportions: vec![0.5, 0.5],
                loglik_trace: Vec::new(),
            }))
        };
        let base = em_fit_1d(&samples, 2, &init([0.4, 1.1], 0.01), 1e-10, 300, 0).unwrap();
        let view = ArrayView2::from_shape((samples.len(), 1), &samples).unwrap();
        let base_resp = responsibilities(&base, view).unwrap();
        let mut rng = stream(10, "affine");
        for _ in 0..5 {
            let a: f64 = if rng.gen_bool(0.5) {
                rng.gen_range(0.1..10.0)
            } else {
                -rng.gen_range(0.1..10.0)
            };
            let b: f64 = rng.gen_range(-5.0..5.0);
            let scaled: Vec<f64> = samples.iter().map(|y| a * y + b).collect();
            let scaled_init = init([a * 0.4 + b, a * 1.1 + b], 0.01 * a * a);
            let fit = em_fit_1d(&scaled, 2, &scaled_init, 1e-10, 300, 0).unwrap();
            let view = ArrayView2::from_shape((scaled.len(), 1), &scaled).unwrap();
            let resp = responsibilities(&fit, view).unwrap();
            for i in 0..samples.len() {
                for k in 0..2 {
                    assert!(
                        (resp[(i, k)] - base_resp[(i, k)]).abs() < 1e-8,
                        "a={a} b={b} i={i} k={k}"
                    );
                }
            }
        }
    }
}
