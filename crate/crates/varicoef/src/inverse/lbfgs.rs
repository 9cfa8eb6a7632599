//! Limited-memory BFGS with a strong-Wolfe line search.

use ndarray::Array1;
use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct LbfgsOptions {
    /// Curvature-pair history length.
    pub history: usize,
    pub max_iters: usize,
    /// Stop when the gradient infinity-norm falls below this.
    pub grad_tol: f64,
    /// Armijo constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            history: 10,
            max_iters: 200,
            grad_tol: 1e-12,
            c1: 1e-4,
            c2: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LbfgsStop {
    GradientSmall,
    MaxIters,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct LbfgsReport {
    pub iters: usize,
    pub evals: usize,
    pub stop: LbfgsStop,
    pub final_value: f64,
}

/// Minimizes `f` starting at `x0`. On line-search failure the best
/// iterate seen so far is returned.
pub fn lbfgs_refine<F>(x0: Array1<f64>, mut f: F, opts: &LbfgsOptions) -> (Array1<f64>, LbfgsReport)
where
    F: FnMut(&Array1<f64>) -> (f64, Array1<f64>),
{
    let mut x = x0;
    let (mut fx, mut gx) = f(&x);
    let mut evals = 1usize;
    let mut best = (x.clone(), fx);
    let mut pairs: VecDeque<(Array1<f64>, Array1<f64>, f64)> = VecDeque::new();

    let dot = |a: &Array1<f64>, b: &Array1<f64>| a.dot(b);
    let inf_norm = |a: &Array1<f64>| a.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    for iter in 0..opts.max_iters {
        if inf_norm(&gx) <= opts.grad_tol {
            return (
                best.0,
                LbfgsReport {
                    iters: iter,
                    evals,
                    stop: LbfgsStop::GradientSmall,
                    final_value: best.1,
                },
            );
        }

        // Two-loop recursion.
        let mut q = gx.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q = &q - &(y * a);
            alphas.push(a);
        }
        let gamma = pairs
            .back()
            .map(|(s, y, _)| dot(s, y) / dot(y, y).max(1e-300))
            .unwrap_or(1.0);
        let mut r = &q * gamma;
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &r);
            r = &r + &(s * (a - b));
        }
        let mut dir = -r;

        let mut dg = dot(&gx, &dir);
        if dg >= 0.0 {
            // Not a descent direction; restart from steepest descent.
            pairs.clear();
            dir = -gx.clone();
            dg = dot(&gx, &dir);
        }

        match wolfe_search(&mut f, &x, fx, &gx, &dir, dg, opts, &mut evals) {
            Some((alpha, x_new, f_new, g_new)) => {
                let s = &x_new - &x;
                let y = &g_new - &gx;
                let sy = dot(&s, &y);
                if sy > 1e-10 * dot(&y, &y).max(1e-300) {
                    if pairs.len() == opts.history {
                        pairs.pop_front();
                    }
                    pairs.push_back((s, y, 1.0 / sy));
                }
                x = x_new;
                fx = f_new;
                gx = g_new;
                if fx < best.1 {
                    best = (x.clone(), fx);
                }
                let _ = alpha;
            }
            None => {
                return (
                    best.0,
                    LbfgsReport {
                        iters: iter,
                        evals,
                        stop: LbfgsStop::LineSearchFailed,
                        final_value: best.1,
                    },
                );
            }
        }
    }
    (
        best.0,
        LbfgsReport {
            iters: opts.max_iters,
            evals,
            stop: LbfgsStop::MaxIters,
            final_value: best.1,
        },
    )
}

type SearchHit = (f64, Array1<f64>, f64, Array1<f64>);

/// Bracketing strong-Wolfe search (Nocedal & Wright alg. 3.5/3.6).
#[allow(clippy::too_many_arguments)]
fn wolfe_search<F>(
    f: &mut F,
    x0: &Array1<f64>,
    f0: f64,
    _g0: &Array1<f64>,
    dir: &Array1<f64>,
    dg0: f64,
    opts: &LbfgsOptions,
    evals: &mut usize,
) -> Option<SearchHit>
where
    F: FnMut(&Array1<f64>) -> (f64, Array1<f64>),
{
    let phi = |alpha: f64, f: &mut F, evals: &mut usize| -> (f64, Array1<f64>, Array1<f64>) {
        let x = x0 + &(dir * alpha);
        let (v, g) = f(&x);
        *evals += 1;
        (v, g, x)
    };
    let mut alpha_prev = 0.0f64;
    let mut f_prev = f0;
    let mut alpha = 1.0f64;
    let max_alpha = 1e4;
    let mut bracket: Option<(f64, f64, f64, f64)> = None; // (lo, f_lo, hi, f_hi)
    let mut lo_state: Option<SearchHit> = None;

    for i in 0..20 {
        let (fv, gv, xv) = phi(alpha, f, evals);
        if !fv.is_finite() {
            // Step into bad territory: shrink hard.
            alpha *= 0.1;
            if alpha < 1e-16 {
                return None;
            }
            continue;
        }
        let dg = gv.dot(dir);
        if fv > f0 + opts.c1 * alpha * dg0 || (i > 0 && fv >= f_prev) {
            bracket = Some((alpha_prev, f_prev, alpha, fv));
            break;
        }
        if dg.abs() <= -opts.c2 * dg0 {
            return Some((alpha, xv, fv, gv));
        }
        if dg >= 0.0 {
            bracket = Some((alpha, fv, alpha_prev, f_prev));
            lo_state = Some((alpha, xv, fv, gv));
            break;
        }
        alpha_prev = alpha;
        f_prev = fv;
        alpha = (alpha * 2.0).min(max_alpha);
        if alpha >= max_alpha {
            return Some((alpha, xv, fv, gv));
        }
    }

    let (mut lo, mut f_lo, mut hi, mut f_hi) = bracket?;
    let mut lo_hit = lo_state;
    for _ in 0..40 {
        let alpha = 0.5 * (lo + hi);
        let (fv, gv, xv) = phi(alpha, f, evals);
        if !fv.is_finite() {
            hi = alpha;
            continue;
        }
        let dg = gv.dot(dir);
        if fv > f0 + opts.c1 * alpha * dg0 || fv >= f_lo {
            hi = alpha;
            f_hi = fv;
        } else {
            if dg.abs() <= -opts.c2 * dg0 {
                return Some((alpha, xv, fv, gv));
            }
            if dg * (hi - lo) >= 0.0 {
                hi = lo;
                f_hi = f_lo;
            }
            lo = alpha;
            f_lo = fv;
            lo_hit = Some((alpha, xv, fv, gv));
        }
        if (hi - lo).abs() <= 1e-14 * lo.abs().max(1.0) {
            break;
        }
    }
    let _ = f_hi;
    // Fall back to the best sufficient-decrease point found.
    lo_hit.filter(|(_, _, fv, _)| *fv < f0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn rosenbrock(x: &Array1<f64>) -> (f64, Array1<f64>) {
        let (a, b) = (x[0], x[1]);
        let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = array![
            -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
            200.0 * (b - a * a)
        ];
        (v, g)
    }

    #[test]
    fn rosenbrock_standard_start() {
        let (x, report) = lbfgs_refine(
            array![-1.2, 1.0],
            rosenbrock,
            &LbfgsOptions {
                max_iters: 200,
                grad_tol: 1e-12,
                ..Default::default()
            },
        );
        assert!(report.iters <= 200);
        assert!(
            (x[0] - 1.0).abs() <= 1e-6 && (x[1] - 1.0).abs() <= 1e-6,
            "ended at {x:?} after {} iters ({:?})",
            report.iters,
            report.stop
        );
    }

    #[test]
    fn quadratic_one_step_family() {
        let (x, _) = lbfgs_refine(
            array![3.0, -5.0],
            |x| {
                let v = x[0] * x[0] + 4.0 * x[1] * x[1];
                (v, array![2.0 * x[0], 8.0 * x[1]])
            },
            &LbfgsOptions::default(),
        );
        assert!(x[0].abs() < 1e-8 && x[1].abs() < 1e-8);
    }
}
