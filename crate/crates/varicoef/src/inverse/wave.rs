//! Staged inverse training for the 2D acoustic wave equation.
//!
//! The backbone approximates the potential `phi(x, z, t)`; the
//! sub-network maps `(x, z)` to the wave speed `alpha` (softplus head,
//! the speed is positive). Four Adam stages — snapshots only, plus
//! traces, then the full interior/free-surface loss twice with learning
//! rate decay — are followed by an L-BFGS refinement of the backbone
//! with the sub-network frozen.

use super::adam::{annealed_lr, AdamState};
use super::batching::BatchCycle;
use super::lbfgs::{lbfgs_refine, LbfgsOptions};
use super::scaled::{sigmoid, softplus, InputScaling, ScaledNet};
use super::{LossRecord, NetSpec, TrainedPair};
use crate::forward::WaveRun;
use crate::net::{Activation, CoordReq, DerivSpec, JetBatch, MlpParams};
use crate::rng::stream;
use crate::{Error, Result};
use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveInverseConfig {
    pub x_extent: f64,
    pub z_extent: f64,
    pub t_end: f64,
    /// Spatial mesh the residual points are drawn from (and the output
    /// sampling of the inferred speed field).
    pub mesh_nx: usize,
    pub mesh_nz: usize,
    /// Interior residual points.
    pub n_r: usize,
    /// Free-surface points.
    pub n_boundary: usize,
    /// Loss weights: interior residual, snapshots, free surface, traces.
    pub w_pde: f64,
    pub w_snap: f64,
    pub w_pc: f64,
    pub w_obs: f64,
    pub backbone: NetSpec,
    pub subnet: NetSpec,
    pub stage_epochs: [usize; 4],
    pub lr0: f64,
    /// Adam decay applied over stages 3-4.
    pub s34_decay: f64,
    pub s34_decay_every: usize,
    pub lbfgs_epochs: usize,
    pub batch_r: usize,
    pub batch_snap: usize,
    pub batch_pc: usize,
    pub batch_obs: usize,
    pub rho: f64,
    pub log_every: usize,
    pub seed: u64,
}

impl WaveInverseConfig {
    /// Full-scale settings.
    pub fn paper(seed: u64) -> Self {
        WaveInverseConfig {
            x_extent: 1.2,
            z_extent: 0.45,
            t_end: 0.5,
            mesh_nx: 200,
            mesh_nz: 200,
            n_r: 40_000,
            n_boundary: 5_000,
            w_pde: 0.1,
            w_snap: 1.0,
            w_pc: 1.0,
            w_obs: 0.1,
            backbone: NetSpec {
                depth: 8,
                width: 100,
                gated: false,
            },
            subnet: NetSpec {
                depth: 5,
                width: 10,
                gated: false,
            },
            stage_epochs: [5_000, 2_000, 30_000, 30_000],
            lr0: 1e-3,
            s34_decay: 0.7,
            s34_decay_every: 2_500,
            lbfgs_epochs: 1_000,
            batch_r: 4_000,
            batch_snap: 4_000,
            batch_pc: 1_000,
            batch_obs: 4_000,
            rho: 1.0,
            log_every: 100,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stage_epochs.iter().any(|&e| e == usize::MAX) {
            return Err(Error::contract("stage epochs out of range"));
        }
        if [self.w_pde, self.w_snap, self.w_pc, self.w_obs]
            .iter()
            .any(|&w| w < 0.0)
        {
            return Err(Error::contract("loss weights must be nonnegative"));
        }
        if self.mesh_nx < 3 || self.mesh_nz < 3 || self.n_r == 0 {
            return Err(Error::contract("mesh/residual counts too small"));
        }
        Ok(())
    }
}

/// Inferred wave-speed field on the output mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaField {
    pub xs: Vec<f64>,
    pub zs: Vec<f64>,
    /// Shape `(nx, nz)`.
    pub alpha: Array2<f64>,
}

impl AlphaField {
    /// Writes `x, z, alpha_hat` rows.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,z,alpha_hat")?;
        for (i, &x) in self.xs.iter().enumerate() {
            for (j, &z) in self.zs.iter().enumerate() {
                writeln!(w, "{:?},{:?},{:?}", x, z, self.alpha[(i, j)])?;
            }
        }
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        use std::io::BufRead;
        let bad = |d: &str| Error::format("alpha csv", d);
        let mut lines = std::io::BufReader::new(r).lines();
        let header = lines.next().ok_or_else(|| bad("empty"))??;
        if header.trim() != "x,z,alpha_hat" {
            return Err(bad("unexpected header"));
        }
        let mut xs: Vec<f64> = Vec::new();
        let mut zs: Vec<f64> = Vec::new();
        let mut vals: Vec<f64> = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(bad("bad column count"));
            }
            let x: f64 = cols[0].trim().parse().map_err(|_| bad("bad x"))?;
            let z: f64 = cols[1].trim().parse().map_err(|_| bad("bad z"))?;
            vals.push(cols[2].trim().parse().map_err(|_| bad("bad alpha"))?);
            if xs.last() != Some(&x) {
                xs.push(x);
            }
            if xs.len() == 1 {
                zs.push(z);
            }
        }
        let (nx, nz) = (xs.len(), zs.len());
        if nx * nz != vals.len() {
            return Err(bad("ragged grid"));
        }
        Ok(AlphaField {
            xs,
            zs,
            alpha: Array2::from_shape_vec((nx, nz), vals).map_err(|e| bad(&e.to_string()))?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct WaveTraining {
    pub pair: TrainedPair,
    pub alpha: AlphaField,
    pub losses: Vec<LossRecord>,
}

struct PointSet {
    /// `(3, n)` columns of (x, z, t).
    pts: Array2<f64>,
    /// Observed values; layout depends on the term.
    vals: Vec<f64>,
}

struct WaveData {
    pde: PointSet,
    pc: PointSet,
    /// Snapshot points with interleaved (ux, uz) targets.
    snap: PointSet,
    obs: PointSet,
}

fn build_data(run: &WaveRun, cfg: &WaveInverseConfig) -> WaveData {
    let mut rng = stream(cfg.seed, "wave-points");
    let mesh_x = |i: usize| cfg.x_extent * i as f64 / (cfg.mesh_nx - 1) as f64;
    let mesh_z = |j: usize| cfg.z_extent * j as f64 / (cfg.mesh_nz - 1) as f64;

    let mut pde_pts = Array2::zeros((3, cfg.n_r));
    for c in 0..cfg.n_r {
        pde_pts[(0, c)] = mesh_x(rng.gen_range(0..cfg.mesh_nx));
        pde_pts[(1, c)] = mesh_z(rng.gen_range(0..cfg.mesh_nz));
        pde_pts[(2, c)] = rng.gen_range(0.0..cfg.t_end);
    }
    let mut pc_pts = Array2::zeros((3, cfg.n_boundary));
    for c in 0..cfg.n_boundary {
        pc_pts[(0, c)] = mesh_x(rng.gen_range(0..cfg.mesh_nx));
        pc_pts[(1, c)] = 0.0;
        pc_pts[(2, c)] = rng.gen_range(0.0..cfg.t_end);
    }

    let (nx, nz) = (run.xs.len(), run.zs.len());
    let n_snap_pts = run.snapshots.len() * nx * nz;
    let mut snap_pts = Array2::zeros((3, n_snap_pts));
    let mut snap_vals = Vec::with_capacity(2 * n_snap_pts);
    let mut c = 0;
    for snap in &run.snapshots {
        for i in 0..nx {
            for j in 0..nz {
                snap_pts[(0, c)] = run.xs[i];
                snap_pts[(1, c)] = run.zs[j];
                snap_pts[(2, c)] = snap.time;
                snap_vals.push(snap.ux[(i, j)]);
                snap_vals.push(snap.uz[(i, j)]);
                c += 1;
            }
        }
    }

    let n_obs = run.trace_times.len() * run.receiver_xs.len();
    let mut obs_pts = Array2::zeros((3, n_obs));
    let mut obs_vals = Vec::with_capacity(n_obs);
    let mut c = 0;
    for (k, &t) in run.trace_times.iter().enumerate() {
        for (r, &x) in run.receiver_xs.iter().enumerate() {
            obs_pts[(0, c)] = x;
            obs_pts[(1, c)] = 0.0;
            obs_pts[(2, c)] = t;
            obs_vals.push(run.traces[(k, r)]);
            c += 1;
        }
    }

    WaveData {
        pde: PointSet {
            pts: pde_pts,
            vals: Vec::new(),
        },
        pc: PointSet {
            pts: pc_pts,
            vals: Vec::new(),
        },
        snap: PointSet {
            pts: snap_pts,
            vals: snap_vals,
        },
        obs: PointSet {
            pts: obs_pts,
            vals: obs_vals,
        },
    }
}

fn gather(src: &Array2<f64>, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((src.nrows(), idx.len()));
    for (c, &i) in idx.iter().enumerate() {
        out.column_mut(c).assign(&src.column(i));
    }
    out
}

fn pde_spec() -> DerivSpec {
    DerivSpec {
        coords: vec![
            CoordReq { coord: 0, order: 2 },
            CoordReq { coord: 1, order: 2 },
            CoordReq { coord: 2, order: 2 },
        ],
    }
}

fn pc_spec() -> DerivSpec {
    DerivSpec {
        coords: vec![
            CoordReq { coord: 0, order: 2 },
            CoordReq { coord: 1, order: 2 },
        ],
    }
}

fn snap_spec() -> DerivSpec {
    DerivSpec::first(&[0, 1])
}

fn obs_spec() -> DerivSpec {
    DerivSpec::first(&[1])
}

/// Accumulated gradient contributions of one loss term.
struct TermGrads {
    loss: f64,
    backbone: crate::net::MlpGrad,
    subnet: Option<crate::net::MlpGrad>,
}

fn pde_term(
    pair: &TrainedPair,
    pts: &Array2<f64>,
    weight: f64,
    rho_pc: Option<f64>,
) -> Result<TermGrads> {
    let spec = if rho_pc.is_some() { pc_spec() } else { pde_spec() };
    let (jets, tape) = pair.backbone.forward_jet_batch(pts.view(), &spec)?;
    let xz = pts.slice(ndarray::s![0..2, ..]).to_owned();
    let (sub_raw, sub_tape) = pair.subnet.forward_jet_batch(xz.view(), &DerivSpec::none())?;
    let b = pts.ncols();
    let mut loss = 0.0;
    let mut cot = JetBatch::zeros_like(&jets);
    let mut cot_sub = JetBatch::zeros_like(&sub_raw);
    for c in 0..b {
        let raw = sub_raw.value[(0, c)];
        let alpha = softplus(raw);
        let lap = jets.second[0].as_ref().unwrap()[(0, c)]
            + jets.second[1].as_ref().unwrap()[(0, c)];
        let (r, scale_a) = match rho_pc {
            // Free-surface pressure residual.
            Some(rho) => (rho * alpha * alpha * lap, rho),
            // Interior residual.
            None => {
                let ptt = jets.second[2].as_ref().unwrap()[(0, c)];
                (alpha * alpha * lap - ptt, 1.0)
            }
        };
        loss += r * r;
        let g = weight * 2.0 * r / b as f64;
        if let Some(m) = cot.second[0].as_mut() {
            m[(0, c)] = g * scale_a * alpha * alpha;
        }
        if let Some(m) = cot.second[1].as_mut() {
            m[(0, c)] = g * scale_a * alpha * alpha;
        }
        if rho_pc.is_none() {
            if let Some(m) = cot.second[2].as_mut() {
                m[(0, c)] = -g;
            }
        }
        cot_sub.value[(0, c)] = g * scale_a * 2.0 * alpha * lap * sigmoid(raw);
    }
    loss /= b as f64;
    let backbone = pair.backbone.backprop(&tape, &cot, &spec)?;
    let subnet = pair.subnet.backprop(&sub_tape, &cot_sub, &DerivSpec::none())?;
    Ok(TermGrads {
        loss,
        backbone,
        subnet: Some(subnet),
    })
}

fn snap_term(
    pair: &TrainedPair,
    pts: &Array2<f64>,
    targets: &[(f64, f64)],
    weight: f64,
) -> Result<TermGrads> {
    let spec = snap_spec();
    let (jets, tape) = pair.backbone.forward_jet_batch(pts.view(), &spec)?;
    let b = pts.ncols();
    let mut loss = 0.0;
    let mut cot = JetBatch::zeros_like(&jets);
    for c in 0..b {
        let rx = jets.first[0][(0, c)] - targets[c].0;
        let rz = jets.first[1][(0, c)] - targets[c].1;
        loss += rx * rx + rz * rz;
        cot.first[0][(0, c)] = weight * rx / b as f64;
        cot.first[1][(0, c)] = weight * rz / b as f64;
    }
    loss /= 2.0 * b as f64;
    let backbone = pair.backbone.backprop(&tape, &cot, &spec)?;
    Ok(TermGrads {
        loss,
        backbone,
        subnet: None,
    })
}

fn obs_term(
    pair: &TrainedPair,
    pts: &Array2<f64>,
    targets: &[f64],
    weight: f64,
) -> Result<TermGrads> {
    let spec = obs_spec();
    let (jets, tape) = pair.backbone.forward_jet_batch(pts.view(), &spec)?;
    let b = pts.ncols();
    let mut loss = 0.0;
    let mut cot = JetBatch::zeros_like(&jets);
    for c in 0..b {
        let r = jets.first[0][(0, c)] - targets[c];
        loss += r * r;
        cot.first[0][(0, c)] = weight * 2.0 * r / b as f64;
    }
    loss /= b as f64;
    let backbone = pair.backbone.backprop(&tape, &cot, &spec)?;
    Ok(TermGrads {
        loss,
        backbone,
        subnet: None,
    })
}

pub fn train_wave(run: &WaveRun, cfg: &WaveInverseConfig) -> Result<WaveTraining> {
    cfg.validate()?;
    if run.snapshots.is_empty() || run.receiver_xs.is_empty() {
        return Err(Error::contract(
            "wave observations need snapshots and receiver traces",
        ));
    }

    let mut init_rng = stream(cfg.seed, "wave-net-init");
    let backbone = ScaledNet::new(
        MlpParams::glorot(
            &cfg.backbone.widths(3, 1),
            Activation::Tanh,
            cfg.backbone.gated,
            &mut init_rng,
        )?,
        InputScaling::from_ranges(&[
            (0.0, cfg.x_extent),
            (0.0, cfg.z_extent),
            (0.0, cfg.t_end),
        ]),
    );
    let subnet = ScaledNet::new(
        MlpParams::glorot(
            &cfg.subnet.widths(2, 1),
            Activation::Tanh,
            cfg.subnet.gated,
            &mut init_rng,
        )?,
        InputScaling::from_ranges(&[(0.0, cfg.x_extent), (0.0, cfg.z_extent)]),
    );
    let mut pair = TrainedPair { backbone, subnet };

    let data = build_data(run, cfg);
    let snap_targets: Vec<(f64, f64)> = data
        .snap
        .vals
        .chunks_exact(2)
        .map(|p| (p[0], p[1]))
        .collect();

    let n_bb = pair.backbone.params.n_params();
    let mut flat = concat_flat(&pair);
    let mut adam = AdamState::new(flat.len());

    let mut cyc_r = BatchCycle::new(data.pde.pts.ncols(), cfg.batch_r, cfg.seed, "wave-b-r");
    let mut cyc_pc = BatchCycle::new(data.pc.pts.ncols(), cfg.batch_pc, cfg.seed, "wave-b-pc");
    let mut cyc_sn = BatchCycle::new(snap_targets.len(), cfg.batch_snap, cfg.seed, "wave-b-snap");
    let mut cyc_ob = BatchCycle::new(data.obs.pts.ncols(), cfg.batch_obs, cfg.seed, "wave-b-obs");

    let mut losses = Vec::new();
    let mut last_good = pair.clone();
    let mut epoch = 0usize;
    let mut s34_epoch = 0usize;

    for (stage, &n_epochs) in cfg.stage_epochs.iter().enumerate() {
        for _ in 0..n_epochs {
            split_pair(&mut pair, &flat, n_bb)?;
            let mut grad_bb = pair.backbone.params.zeros_grad();
            let mut grad_sub = pair.subnet.params.zeros_grad();
            let mut total = 0.0;
            let mut data_part = 0.0;
            let mut physics_part = 0.0;

            // Snapshots participate in every stage.
            let idx = cyc_sn.next();
            let pts = gather(&data.snap.pts, &idx);
            let targets: Vec<(f64, f64)> = idx.iter().map(|&i| snap_targets[i]).collect();
            let term = snap_term(&pair, &pts, &targets, cfg.w_snap)?;
            total += cfg.w_snap * term.loss;
            data_part += cfg.w_snap * term.loss;
            grad_bb.add_assign(&term.backbone);

            if stage >= 1 {
                let idx = cyc_ob.next();
                let pts = gather(&data.obs.pts, &idx);
                let targets: Vec<f64> = idx.iter().map(|&i| data.obs.vals[i]).collect();
                let term = obs_term(&pair, &pts, &targets, cfg.w_obs)?;
                total += cfg.w_obs * term.loss;
                data_part += cfg.w_obs * term.loss;
                grad_bb.add_assign(&term.backbone);
            }

            if stage >= 2 {
                let idx = cyc_r.next();
                let pts = gather(&data.pde.pts, &idx);
                let term = pde_term(&pair, &pts, cfg.w_pde, None)?;
                total += cfg.w_pde * term.loss;
                physics_part += cfg.w_pde * term.loss;
                grad_bb.add_assign(&term.backbone);
                grad_sub.add_assign(term.subnet.as_ref().unwrap());

                let idx = cyc_pc.next();
                let pts = gather(&data.pc.pts, &idx);
                let term = pde_term(&pair, &pts, cfg.w_pc, Some(cfg.rho))?;
                total += cfg.w_pc * term.loss;
                physics_part += cfg.w_pc * term.loss;
                grad_bb.add_assign(&term.backbone);
                grad_sub.add_assign(term.subnet.as_ref().unwrap());
            }

            if !total.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    checkpoint: Box::new(last_good),
                });
            }

            let lr = if stage >= 2 {
                s34_epoch += 1;
                annealed_lr(cfg.lr0, cfg.s34_decay, cfg.s34_decay_every, s34_epoch - 1)
            } else {
                cfg.lr0
            };
            let mut grad = Array1::zeros(flat.len());
            grad.slice_mut(ndarray::s![..n_bb]).assign(&grad_bb.flatten());
            grad.slice_mut(ndarray::s![n_bb..]).assign(&grad_sub.flatten());
            adam.step(&mut flat, &grad, lr);
            if flat.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    epoch,
                    checkpoint: Box::new(last_good),
                });
            }

            if epoch % cfg.log_every.max(1) == 0 {
                losses.push(LossRecord {
                    epoch,
                    mse_o: data_part,
                    mse_r: physics_part,
                    total,
                });
                last_good = pair.clone();
            }
            epoch += 1;
        }
    }
    split_pair(&mut pair, &flat, n_bb)?;

    // L-BFGS refinement of the backbone, sub-network frozen.
    if cfg.lbfgs_epochs > 0 {
        let bb0 = pair.backbone.params.flatten();
        let mut probe = pair.clone();
        let eval = move |x: &Array1<f64>| eval_full(&mut probe, x, cfg, &data, &snap_targets);
        let (bb_final, report) = lbfgs_refine(
            bb0,
            eval,
            &LbfgsOptions {
                max_iters: cfg.lbfgs_epochs,
                ..Default::default()
            },
        );
        pair.backbone.params.assign_flat(&bb_final)?;
        losses.push(LossRecord {
            epoch,
            mse_o: f64::NAN,
            mse_r: f64::NAN,
            total: report.final_value,
        });
    }

    let alpha = sample_alpha(&pair, cfg)?;
    Ok(WaveTraining {
        pair,
        alpha,
        losses,
    })
}

fn eval_full(
    pair: &mut TrainedPair,
    x: &Array1<f64>,
    cfg: &WaveInverseConfig,
    data: &WaveData,
    snap_targets: &[(f64, f64)],
) -> (f64, Array1<f64>) {
    if pair.backbone.params.assign_flat(x).is_err() {
        return (f64::INFINITY, Array1::zeros(x.len()));
    }
    let mut value = 0.0;
    let mut grad = pair.backbone.params.zeros_grad();
    let terms = [
        snap_term(pair, &data.snap.pts, snap_targets, cfg.w_snap).map(|t| (t, cfg.w_snap)),
        obs_term(pair, &data.obs.pts, &data.obs.vals, cfg.w_obs).map(|t| (t, cfg.w_obs)),
        pde_term(pair, &data.pde.pts, cfg.w_pde, None).map(|t| (t, cfg.w_pde)),
        pde_term(pair, &data.pc.pts, cfg.w_pc, Some(cfg.rho)).map(|t| (t, cfg.w_pc)),
    ];
    for term in terms {
        match term {
            Ok((t, w)) => {
                value += w * t.loss;
                grad.add_assign(&t.backbone);
            }
            Err(_) => return (f64::INFINITY, Array1::zeros(x.len())),
        }
    }
    (value, grad.flatten())
}

/// Samples the inferred speed on the output mesh.
pub fn sample_alpha(pair: &TrainedPair, cfg: &WaveInverseConfig) -> Result<AlphaField> {
    let xs: Vec<f64> = (0..cfg.mesh_nx)
        .map(|i| cfg.x_extent * i as f64 / (cfg.mesh_nx - 1) as f64)
        .collect();
    let zs: Vec<f64> = (0..cfg.mesh_nz)
        .map(|j| cfg.z_extent * j as f64 / (cfg.mesh_nz - 1) as f64)
        .collect();
    let mut pts = Array2::zeros((2, cfg.mesh_nx * cfg.mesh_nz));
    let mut c = 0;
    for &x in &xs {
        for &z in &zs {
            pts[(0, c)] = x;
            pts[(1, c)] = z;
            c += 1;
        }
    }
    let raw = pair.subnet.forward(pts.view())?;
    let mut alpha = Array2::zeros((cfg.mesh_nx, cfg.mesh_nz));
    let mut c = 0;
    for i in 0..cfg.mesh_nx {
        for j in 0..cfg.mesh_nz {
            alpha[(i, j)] = softplus(raw[(0, c)]);
            c += 1;
        }
    }
    Ok(AlphaField { xs, zs, alpha })
}

fn concat_flat(pair: &TrainedPair) -> Array1<f64> {
    let a = pair.backbone.params.flatten();
    let b = pair.subnet.params.flatten();
    let mut out = Array1::zeros(a.len() + b.len());
    out.slice_mut(ndarray::s![..a.len()]).assign(&a);
    out.slice_mut(ndarray::s![a.len()..]).assign(&b);
    out
}

fn split_pair(pair: &mut TrainedPair, flat: &Array1<f64>, n_bb: usize) -> Result<()> {
    pair.backbone
        .params
        .assign_flat(&flat.slice(ndarray::s![..n_bb]).to_owned())?;
    pair.subnet
        .params
        .assign_flat(&flat.slice(ndarray::s![n_bb..]).to_owned())?;
    Ok(())
}
