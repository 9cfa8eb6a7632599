//! Constrained self-adaptive physics-informed training.

mod adam;
mod adaptive;
mod batching;
mod burgers;
mod lbfgs;
mod loss;
mod scaled;
mod wave;

pub use adam::{annealed_lr, AdamState};
pub use adaptive::AdaptiveWeightState;
pub use burgers::{train_burgers, BurgersInverseConfig, BurgersTraining};
pub use lbfgs::{lbfgs_refine, LbfgsOptions, LbfgsReport, LbfgsStop};
pub use loss::{
    burgers_residual_point, burgers_residuals, data_mse, wave_pc_residual_point,
    wave_pde_residual_point, wave_snapshot_residual_point, wave_trace_residual_point,
};
pub use scaled::{sigmoid, softplus, InputScaling, ScaledNet};
pub use wave::{train_wave, AlphaField, WaveInverseConfig, WaveTraining};

use serde::{Deserialize, Serialize};

/// Architecture of one network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    /// Hidden layer count.
    pub depth: usize,
    /// Hidden layer width.
    pub width: usize,
    /// Use the gated (two-encoder) architecture.
    pub gated: bool,
}

impl NetSpec {
    pub fn widths(&self, input: usize, output: usize) -> Vec<usize> {
        let mut w = vec![input];
        w.extend(std::iter::repeat(self.width).take(self.depth));
        w.push(output);
        w
    }
}

/// Trained backbone/sub-network pair (with their input scalings).
#[derive(Debug, Clone)]
pub struct TrainedPair {
    pub backbone: ScaledNet,
    pub subnet: ScaledNet,
}

/// One loss-history record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub mse_o: f64,
    pub mse_r: f64,
    pub total: f64,
}

/// Coefficient trace on the canonical time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BurgersTrace {
    pub times: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub lambda2: Vec<f64>,
}

impl BurgersTrace {
    /// Writes `t, lambda1_hat, lambda2_hat` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> crate::Result<()> {
        writeln!(w, "t,lambda1_hat,lambda2_hat")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{:?},{:?},{:?}",
                self.times[i], self.lambda1[i], self.lambda2[i]
            )?;
        }
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> crate::Result<Self> {
        use std::io::BufRead;
        let bad = |d: &str| crate::Error::format("trace csv", d);
        let reader = std::io::BufReader::new(r);
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| bad("empty"))??;
        if header.trim() != "t,lambda1_hat,lambda2_hat" {
            return Err(bad("unexpected header"));
        }
        let mut out = BurgersTrace {
            times: Vec::new(),
            lambda1: Vec::new(),
            lambda2: Vec::new(),
        };
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(bad("bad column count"));
            }
            out.times
                .push(cols[0].trim().parse().map_err(|_| bad("bad t"))?);
            out.lambda1
                .push(cols[1].trim().parse().map_err(|_| bad("bad lambda1"))?);
            out.lambda2
                .push(cols[2].trim().parse().map_err(|_| bad("bad lambda2"))?);
        }
        Ok(out)
    }
}
