//! Adam optimizer on flat parameter vectors.

use ndarray::Array1;

#[derive(Debug, Clone)]
pub struct AdamState {
    m: Array1<f64>,
    v: Array1<f64>,
    t: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: Array1::zeros(n),
            v: Array1::zeros(n),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected step in place.
    pub fn step(&mut self, params: &mut Array1<f64>, grad: &Array1<f64>, lr: f64) {
        debug_assert_eq!(params.len(), grad.len());
        debug_assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Staircase exponential annealing: `lr0 * gamma^(epoch / every)`.
pub fn annealed_lr(lr0: f64, gamma: f64, every: usize, epoch: usize) -> f64 {
    lr0 * gamma.powi((epoch / every.max(1)) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn quadratic_converges() {
        // f(w) = w^2 from w = 1 at lr 0.1: |w| <= 1e-3 after 200 steps.
        let mut w = array![1.0];
        let mut adam = AdamState::new(1);
        for _ in 0..200 {
            let grad = array![2.0 * w[0]];
            adam.step(&mut w, &grad, 0.1);
        }
        assert!(w[0].abs() <= 1e-3, "w = {}", w[0]);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut w = array![0.3, -0.7];
        let mut adam = AdamState::new(2);
        adam.step(&mut w, &array![0.0, 0.0], 0.5);
        assert_eq!(w, array![0.3, -0.7]);
    }

    #[test]
    fn annealing_staircase() {
        assert_eq!(annealed_lr(1.0, 0.9, 10, 0), 1.0);
        assert_eq!(annealed_lr(1.0, 0.9, 10, 9), 1.0);
        assert!((annealed_lr(1.0, 0.9, 10, 10) - 0.9).abs() < 1e-15);
        assert!((annealed_lr(1.0, 0.9, 10, 25) - 0.81).abs() < 1e-15);
    }
}
