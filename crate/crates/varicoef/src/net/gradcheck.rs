//! Finite-difference validation of reverse-mode gradients.

use super::{loss_param_grad, JetLoss, MlpParams};
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;

/// Compares analytic parameter gradients against central finite
/// differences on `n_probes` randomly chosen parameters and returns the
/// maximum relative error `|analytic - fd| / (|fd| + 1e-12)`.
pub fn grad_check<R: Rng>(
    params: &MlpParams,
    loss: &impl JetLoss,
    n_probes: usize,
    rng: &mut R,
) -> Result<f64> {
    if n_probes == 0 {
        return Err(Error::contract("n_probes must be at least 1"));
    }
    let (_, grad) = loss_param_grad(params, loss)?;
    let analytic = grad.flatten();
    let flat = params.flatten();
    let n = flat.len();
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(rng);
    indices.truncate(n_probes.min(n));

    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut probe = params.clone();
    for idx in indices {
        let mut fp = flat.clone();
        fp[idx] += h;
        probe.assign_flat(&fp)?;
        let (plus, _) = loss_param_grad(&probe, loss)?;
        fp[idx] -= 2.0 * h;
        probe.assign_flat(&fp)?;
        let (minus, _) = loss_param_grad(&probe, loss)?;
        let fd = (plus - minus) / (2.0 * h);
        worst = worst.max((analytic[idx] - fd).abs() / (fd.abs() + 1e-12));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, DerivSpec, JetBatch};
    use crate::rng::stream;
    use ndarray::Array2;

    /// Quadratic data-style loss: mean of (u - target)^2.
    struct DataLoss {
        pts: Array2<f64>,
        targets: Vec<f64>,
    }

    impl JetLoss for DataLoss {
        fn spec(&self) -> DerivSpec {
            DerivSpec::none()
        }
        fn points(&self) -> ndarray::ArrayView2<'_, f64> {
            self.pts.view()
        }
        fn eval(&self, jets: &JetBatch) -> (f64, JetBatch) {
            let n = jets.n_points() as f64;
            let mut cot = JetBatch::zeros_like(jets);
            let mut loss = 0.0;
            for col in 0..jets.n_points() {
                let d = jets.value[(0, col)] - self.targets[col];
                loss += d * d / n;
                cot.value[(0, col)] = 2.0 * d / n;
            }
            (loss, cot)
        }
    }

    #[test]
    fn linear_net_quadratic_loss_is_exact() {
        // A purely linear map makes the loss quadratic in the final-layer
        // parameters and the FD error is roundoff only.
        let p = crate::net::MlpParams {
            layer_widths: vec![1, 1],
            weights: vec![ndarray::array![[1.3]]],
            biases: vec![ndarray::array![0.2]],
            activation: Activation::Tanh,
            gating: None,
        };
        let loss = DataLoss {
            pts: ndarray::array![[0.5, -1.0, 2.0]],
            targets: vec![1.0, 0.0, -0.5],
        };
        let mut rng = stream(31, "gc");
        let worst = grad_check(&p, &loss, 2, &mut rng).unwrap();
        assert!(worst <= 1e-9, "worst {worst}");
    }

    #[test]
    fn tanh_net_data_loss() {
        let mut rng = stream(32, "gc");
        let p = crate::net::MlpParams::glorot(&[2, 12, 12, 1], Activation::Tanh, true, &mut rng)
            .unwrap();
        let pts = Array2::from_shape_fn((2, 16), |_| rng.gen_range(-1.0..1.0));
        let targets = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let loss = DataLoss { pts, targets };
        let worst = grad_check(&p, &loss, 40, &mut rng).unwrap();
        assert!(worst <= 1e-6, "worst {worst}");
    }

    #[test]
    fn zero_probes_rejected() {
        let mut rng = stream(33, "gc");
        let p = crate::net::MlpParams::glorot(&[1, 4, 1], Activation::Tanh, false, &mut rng)
            .unwrap();
        let loss = DataLoss {
            pts: Array2::zeros((1, 1)),
            targets: vec![0.0],
        };
        assert!(grad_check(&p, &loss, 0, &mut rng).is_err());
    }
}
