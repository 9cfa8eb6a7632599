//! Finite-difference solver for the 2D acoustic wave equation
//! `phi_tt = alpha(x,z)^2 (phi_xx + phi_zz)` on a rectangle.
//!
//! Second order in time (leapfrog), fourth order in space. The top edge
//! `z = 0` is a free surface: `phi = 0` there with odd ghost extension,
//! which makes both `phi` and its Laplacian vanish on the surface (zero
//! pressure). The other three edges carry exponential sponge layers.
//! The run emits the potential, gradient snapshots at chosen times, and
//! vertical-displacement traces at surface receivers.

use crate::{Error, Result};
use ndarray::Array2;
use std::io::{BufRead, BufReader, Read, Write};

/// Medium description: node counts, spacings (km), wave speed (km/s).
#[derive(Debug, Clone)]
pub struct WaveMedium {
    pub nx: usize,
    pub nz: usize,
    pub dx: f64,
    pub dz: f64,
    /// Wave speed per node, shape `(nx, nz)`; `z` index 0 is the surface.
    pub alpha: Array2<f64>,
    pub rho: f64,
}

impl WaveMedium {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 8 || self.nz < 8 {
            return Err(Error::contract("wave grid too small"));
        }
        if self.alpha.dim() != (self.nx, self.nz) {
            return Err(Error::contract("alpha shape mismatch"));
        }
        if self.alpha.iter().any(|&a| !(a > 0.0) || !a.is_finite()) {
            return Err(Error::contract("alpha must be positive and finite"));
        }
        if self.dx <= 0.0 || self.dz <= 0.0 || self.rho <= 0.0 {
            return Err(Error::contract("spacings and density must be positive"));
        }
        Ok(())
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| i as f64 * self.dx).collect()
    }

    pub fn zs(&self) -> Vec<f64> {
        (0..self.nz).map(|j| j as f64 * self.dz).collect()
    }

    /// Largest stable leapfrog step for the fourth-order stencil.
    pub fn admissible_dt(&self) -> f64 {
        let a_max = self.alpha.iter().cloned().fold(0.0f64, f64::max);
        let inv = 1.0 / (self.dx * self.dx) + 1.0 / (self.dz * self.dz);
        // Stencil constant: |symbol| <= 16/3 per axis.
        (3.0f64).sqrt() / (2.0 * a_max * inv.sqrt())
    }
}

/// Whether the pulse seeds the potential or its time derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    Displacement,
    Velocity,
}

/// Initial Gaussian pulse in the potential (or its rate).
#[derive(Debug, Clone, Copy)]
pub struct GaussianPulse {
    pub x0: f64,
    pub z0: f64,
    pub width: f64,
    pub amplitude: f64,
    pub kind: SourceKind,
}

/// Run controls.
#[derive(Debug, Clone)]
pub struct WaveRunConfig {
    pub t_end: f64,
    /// Explicit step; `None` picks `cfl_safety * admissible`.
    pub dt: Option<f64>,
    pub cfl_safety: f64,
    /// Receiver x positions on the surface.
    pub receivers: Vec<f64>,
    pub snapshot_times: Vec<f64>,
    /// Sponge width in cells on the left/right/bottom edges.
    pub sponge_cells: usize,
    /// Store the potential every this many steps.
    pub store_every: usize,
}

impl WaveRunConfig {
    /// `n` receivers spread evenly across the surface.
    pub fn equispaced_receivers(n: usize, x_extent: f64) -> Vec<f64> {
        (0..n)
            .map(|r| x_extent * (r as f64 + 0.5) / n as f64)
            .collect()
    }
}

/// Gradient snapshot at one time.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    pub ux: Array2<f64>,
    pub uz: Array2<f64>,
}

/// Output of one forward wave run.
#[derive(Debug, Clone)]
pub struct WaveRun {
    pub xs: Vec<f64>,
    pub zs: Vec<f64>,
    pub dt: f64,
    /// Times of the stored potential frames.
    pub frame_times: Vec<f64>,
    pub frames: Vec<Array2<f64>>,
    pub snapshots: Vec<Snapshot>,
    pub receiver_xs: Vec<f64>,
    /// One row per time step (including t = 0), one column per receiver;
    /// vertical displacement `phi_z` at the surface.
    pub trace_times: Vec<f64>,
    pub traces: Array2<f64>,
    pub provenance: String,
}

/// Fourth-order Laplacian with free-surface (odd) ghosts at z = 0 and
/// zero ghosts elsewhere.
fn laplacian(phi: &Array2<f64>, dx: f64, dz: f64, out: &mut Array2<f64>) {
    let (nx, nz) = phi.dim();
    let cx = 1.0 / (12.0 * dx * dx);
    let cz = 1.0 / (12.0 * dz * dz);
    let get = |i: isize, j: isize| -> f64 {
        if j < 0 {
            // Odd extension across the free surface.
            if i < 0 || i >= nx as isize {
                0.0
            } else {
                -phi[(i as usize, (-j) as usize)]
            }
        } else if i < 0 || i >= nx as isize || j >= nz as isize {
            0.0
        } else {
            phi[(i as usize, j as usize)]
        }
    };
    for i in 0..nx {
        for j in 0..nz {
            let (ii, jj) = (i as isize, j as isize);
            let d2x = -get(ii - 2, jj) + 16.0 * get(ii - 1, jj) - 30.0 * phi[(i, j)]
                + 16.0 * get(ii + 1, jj)
                - get(ii + 2, jj);
            let d2z = -get(ii, jj - 2) + 16.0 * get(ii, jj - 1) - 30.0 * phi[(i, j)]
                + 16.0 * get(ii, jj + 1)
                - get(ii, jj + 2);
            out[(i, j)] = cx * d2x + cz * d2z;
        }
    }
}

/// Central gradient (fourth order inside, second order near edges, odd
/// ghosts across the surface for the z component).
pub fn gradient(phi: &Array2<f64>, dx: f64, dz: f64) -> (Array2<f64>, Array2<f64>) {
    let (nx, nz) = phi.dim();
    let mut ux = Array2::zeros((nx, nz));
    let mut uz = Array2::zeros((nx, nz));
    let getz = |i: usize, j: isize| -> f64 {
        if j < 0 {
            -phi[(i, (-j) as usize)]
        } else if j >= nz as isize {
            0.0
        } else {
            phi[(i, j as usize)]
        }
    };
    for i in 0..nx {
        for j in 0..nz {
            ux[(i, j)] = if i >= 2 && i + 2 < nx {
                (-phi[(i + 2, j)] + 8.0 * phi[(i + 1, j)] - 8.0 * phi[(i - 1, j)]
                    + phi[(i - 2, j)])
                    / (12.0 * dx)
            } else if i >= 1 && i + 1 < nx {
                (phi[(i + 1, j)] - phi[(i - 1, j)]) / (2.0 * dx)
            } else if i == 0 {
                (phi[(1, j)] - phi[(0, j)]) / dx
            } else {
                (phi[(i, j)] - phi[(i - 1, j)]) / dx
            };
            let jj = j as isize;
            uz[(i, j)] = if j + 2 < nz {
                (-getz(i, jj + 2) + 8.0 * getz(i, jj + 1) - 8.0 * getz(i, jj - 1)
                    + getz(i, jj - 2))
                    / (12.0 * dz)
            } else if j + 1 < nz {
                (getz(i, jj + 1) - getz(i, jj - 1)) / (2.0 * dz)
            } else {
                (phi[(i, j)] - phi[(i, j - 1)]) / dz
            };
        }
    }
    (ux, uz)
}

pub fn solve_wave(
    medium: &WaveMedium,
    source: &GaussianPulse,
    cfg: &WaveRunConfig,
) -> Result<WaveRun> {
    medium.validate()?;
    if cfg.t_end <= 0.0 {
        return Err(Error::contract("t_end must be positive"));
    }
    let admissible = medium.admissible_dt();
    let dt = match cfg.dt {
        Some(dt) => {
            if dt > admissible {
                return Err(Error::Cfl { dt, admissible });
            }
            dt
        }
        None => {
            let target = cfg.cfl_safety.clamp(0.05, 0.95) * admissible;
            cfg.t_end / (cfg.t_end / target).ceil()
        }
    };
    let n_steps = (cfg.t_end / dt).round() as usize;
    for &ts in &cfg.snapshot_times {
        if !(ts > 0.0 && ts <= cfg.t_end) {
            return Err(Error::contract(format!(
                "snapshot time {ts} outside (0, {}]",
                cfg.t_end
            )));
        }
    }

    let (nx, nz) = (medium.nx, medium.nz);
    let mut pulse = Array2::zeros((nx, nz));
    for i in 0..nx {
        for j in 0..nz {
            let x = i as f64 * medium.dx - source.x0;
            let z = j as f64 * medium.dz - source.z0;
            let r2 = x * x + z * z;
            pulse[(i, j)] = source.amplitude * (-r2 / (2.0 * source.width * source.width)).exp();
        }
    }
    let (mut phi_prev, vel0) = match source.kind {
        SourceKind::Displacement => (pulse, Array2::zeros((nx, nz))),
        SourceKind::Velocity => (Array2::zeros((nx, nz)), pulse),
    };
    // Free surface: the potential vanishes on z = 0 for all time.
    phi_prev.column_mut(0).fill(0.0);

    // Sponge profile on left/right/bottom edges (Cerjan-style).
    let sponge = {
        let w = cfg.sponge_cells.min(nx / 3).min(nz / 3);
        let mut s = Array2::from_elem((nx, nz), 1.0f64);
        if w > 0 {
            let damp = |d: usize| -> f64 {
                let r = (w - d) as f64 / w as f64;
                (-(0.9 * r) * (0.9 * r)).exp()
            };
            for i in 0..nx {
                for j in 0..nz {
                    let mut f = 1.0f64;
                    if i < w {
                        f = f.min(damp(i));
                    }
                    if nx - 1 - i < w {
                        f = f.min(damp(nx - 1 - i));
                    }
                    if nz - 1 - j < w {
                        f = f.min(damp(nz - 1 - j));
                    }
                    s[(i, j)] = f;
                }
            }
        }
        s
    };

    let alpha2 = medium.alpha.mapv(|a| a * a);
    let mut lap = Array2::zeros((nx, nz));

    // Receivers -> nearest surface node.
    let rec_ix: Vec<usize> = cfg
        .receivers
        .iter()
        .map(|&x| ((x / medium.dx).round() as usize).min(nx - 1))
        .collect();
    let mut traces = Array2::zeros((n_steps + 1, rec_ix.len()));
    let mut trace_times = Vec::with_capacity(n_steps + 1);
    let record = |phi: &Array2<f64>, row: usize, traces: &mut Array2<f64>| {
        for (col, &ix) in rec_ix.iter().enumerate() {
            // phi_z at the surface via the odd extension.
            let uz = (16.0 * phi[(ix, 1)] - 2.0 * phi[(ix, 2)]) / (12.0 * medium.dz);
            traces[(row, col)] = uz;
        }
    };
    record(&phi_prev, 0, &mut traces);
    trace_times.push(0.0);

    let snap_steps: Vec<usize> = cfg
        .snapshot_times
        .iter()
        .map(|&ts| ((ts / dt).round() as usize).clamp(1, n_steps))
        .collect();

    let mut frames = Vec::new();
    let mut frame_times = Vec::new();
    let store_every = cfg.store_every.max(1);
    frames.push(phi_prev.clone());
    frame_times.push(0.0);

    let mut snapshots = Vec::new();

    // First step by Taylor expansion.
    laplacian(&phi_prev, medium.dx, medium.dz, &mut lap);
    let mut phi = &phi_prev + &(&vel0 * dt) + &(&alpha2 * &lap * (0.5 * dt * dt));
    phi.column_mut(0).fill(0.0);
    phi *= &sponge;
    let mut t = dt;
    record(&phi, 1, &mut traces);
    trace_times.push(t);
    let check_and_emit = |step: usize,
                              t: f64,
                              phi: &Array2<f64>,
                              frames: &mut Vec<Array2<f64>>,
                              frame_times: &mut Vec<f64>,
                              snapshots: &mut Vec<Snapshot>|
     -> Result<()> {
        if step % store_every == 0 || step == n_steps {
            if phi.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp {
                    step,
                    time: t,
                    detail: "non-finite wave state".into(),
                });
            }
            frames.push(phi.clone());
            frame_times.push(t);
        }
        for (k, &ss) in snap_steps.iter().enumerate() {
            if ss == step {
                let (ux, uz) = gradient(phi, medium.dx, medium.dz);
                snapshots.push(Snapshot {
                    time: t,
                    ux,
                    uz,
                });
                let _ = k;
            }
        }
        Ok(())
    };
    check_and_emit(1, t, &phi, &mut frames, &mut frame_times, &mut snapshots)?;

    for step in 2..=n_steps {
        laplacian(&phi, medium.dx, medium.dz, &mut lap);
        let mut next = Array2::zeros((nx, nz));
        ndarray::Zip::from(&mut next)
            .and(&phi)
            .and(&phi_prev)
            .and(&alpha2)
            .and(&lap)
            .for_each(|n, &c, &p, &a2, &l| {
                *n = 2.0 * c - p + dt * dt * a2 * l;
            });
        next.column_mut(0).fill(0.0);
        next *= &sponge;
        phi_prev = phi;
        phi_prev *= &sponge;
        phi = next;
        t = step as f64 * dt;
        record(&phi, step, &mut traces);
        trace_times.push(t);
        check_and_emit(step, t, &phi, &mut frames, &mut frame_times, &mut snapshots)?;
    }

    // Keep snapshots in the requested order.
    let mut ordered = Vec::with_capacity(snap_steps.len());
    for &ss in &snap_steps {
        let want_t = ss as f64 * dt;
        let found = snapshots
            .iter()
            .find(|s| (s.time - want_t).abs() < 0.5 * dt)
            .cloned()
            .ok_or_else(|| Error::contract("snapshot step missing"))?;
        ordered.push(found);
    }

    Ok(WaveRun {
        xs: medium.xs(),
        zs: medium.zs(),
        dt,
        frame_times,
        frames,
        snapshots: ordered,
        receiver_xs: rec_ix.iter().map(|&ix| ix as f64 * medium.dx).collect(),
        trace_times,
        traces,
        provenance: "wave-fd4-leapfrog".into(),
    })
}

impl WaveRun {
    /// Trace CSV: `t, rcv_0, ..., rcv_{R-1}`, one row per time step.
    pub fn write_traces_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((0..self.traces.ncols()).map(|r| format!("rcv_{r}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (row, &t) in self.trace_times.iter().enumerate() {
            let mut line = format!("{t:?}");
            for col in 0..self.traces.ncols() {
                line.push_str(&format!(",{:?}", self.traces[(row, col)]));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn read_traces_csv<R: Read>(r: R) -> Result<(Vec<f64>, Array2<f64>)> {
        let bad = |d: &str| Error::format("trace csv", d);
        let mut lines = BufReader::new(r).lines();
        let header = lines.next().ok_or_else(|| bad("empty file"))??;
        let n_rcv = header.split(',').count().saturating_sub(1);
        let mut times = Vec::new();
        let mut data = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            times.push(
                parts
                    .next()
                    .unwrap()
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| bad("bad time"))?,
            );
            for p in parts {
                data.push(p.trim().parse::<f64>().map_err(|_| bad("bad sample"))?);
            }
        }
        let rows = times.len();
        if data.len() != rows * n_rcv {
            return Err(bad("ragged rows"));
        }
        Ok((
            times,
            Array2::from_shape_vec((rows, n_rcv), data).map_err(|e| bad(&e.to_string()))?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn homogeneous(nx: usize, nz: usize, h: f64, a: f64) -> WaveMedium {
        WaveMedium {
            nx,
            nz,
            dx: h,
            dz: h,
            alpha: Array2::from_elem((nx, nz), a),
            rho: 1.0,
        }
    }

    #[test]
    fn zero_source_stays_zero() {
        let medium = homogeneous(32, 32, 0.01, 3.0);
        let cfg = WaveRunConfig {
            t_end: 0.02,
            dt: None,
            cfl_safety: 0.8,
            receivers: vec![0.1, 0.2],
            snapshot_times: vec![0.01],
            sponge_cells: 6,
            store_every: 8,
        };
        let pulse = GaussianPulse {
            x0: 0.15,
            z0: 0.15,
            width: 0.02,
            amplitude: 0.0,
            kind: SourceKind::Displacement,
        };
        let run = solve_wave(&medium, &pulse, &cfg).unwrap();
        assert!(run.frames.iter().all(|f| f.iter().all(|&v| v == 0.0)));
        assert!(run.traces.iter().all(|&v| v == 0.0));
        assert!(run.snapshots[0].ux.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cfl_violation_reports_admissible_step() {
        let medium = homogeneous(32, 32, 0.01, 3.0);
        let cfg = WaveRunConfig {
            t_end: 0.1,
            dt: Some(1.0),
            cfl_safety: 0.8,
            receivers: vec![],
            snapshot_times: vec![],
            sponge_cells: 0,
            store_every: 1,
        };
        let pulse = GaussianPulse {
            x0: 0.15,
            z0: 0.15,
            width: 0.02,
            amplitude: 1.0,
            kind: SourceKind::Displacement,
        };
        match solve_wave(&medium, &pulse, &cfg) {
            Err(Error::Cfl { admissible, .. }) => {
                assert!(admissible > 0.0 && admissible < 1.0);
            }
            other => panic!("expected CFL error, got {other:?}"),
        }
    }

    /// Radius of the ring of peak |grad phi| along the +x ray, sub-cell.
    fn ring_radius(snap: &Snapshot, n: usize, h: f64) -> f64 {
        let j0 = n / 2;
        let i0 = n / 2;
        let g = |i: usize| snap.ux[(i, j0)].hypot(snap.uz[(i, j0)]);
        let mut best = (0usize, 0.0f64);
        for i in i0 + 2..n - 2 {
            if g(i) > best.1 {
                best = (i, g(i));
            }
        }
        let i = best.0;
        let (gm, gp) = (g(i - 1), g(i + 1));
        let denom = gm - 2.0 * best.1 + gp;
        let frac = if denom.abs() > 1e-300 {
            0.5 * (gm - gp) / denom
        } else {
            0.0
        };
        ((i as f64 + frac) - i0 as f64) * h
    }

    /// The wavefront expands at speed alpha: radius ~ alpha t within a cell.
    #[test]
    fn front_speed_matches_medium() {
        let n = 161;
        let h = 1.0 / (n as f64 - 1.0);
        let alpha = 3.0;
        let medium = homogeneous(n, n, h, alpha);
        let pulse = GaussianPulse {
            x0: 0.5,
            z0: 0.5,
            width: 1.5 * h,
            amplitude: 1.0,
            kind: SourceKind::Velocity,
        };
        let t_end = 0.12;
        let cfg = WaveRunConfig {
            t_end,
            dt: None,
            cfl_safety: 0.6,
            receivers: vec![],
            snapshot_times: vec![0.5 * t_end, t_end],
            sponge_cells: 0,
            store_every: 1_000_000,
        };
        let run = solve_wave(&medium, &pulse, &cfg).unwrap();
        let r1 = ring_radius(&run.snapshots[0], n, h);
        let r2 = ring_radius(&run.snapshots[1], n, h);
        let (t1, t2) = (run.snapshots[0].time, run.snapshots[1].time);
        assert!(
            (r1 - alpha * t1).abs() <= h,
            "front at {r1}, expected {} (cell {h})",
            alpha * t1
        );
        assert!(
            (r2 - alpha * t2).abs() <= h,
            "front at {r2}, expected {} (cell {h})",
            alpha * t2
        );
        // Growth between the two snapshots isolates the propagation speed
        // from the constant ring-shape offset of the smoothed pulse.
        let grown = r2 - r1;
        assert!(
            (grown - alpha * (t2 - t1)).abs() <= h,
            "front grew {grown}, expected {}",
            alpha * (t2 - t1)
        );
    }

    #[test]
    fn interior_energy_is_conserved_before_boundary_contact() {
        let n = 129;
        let h = 1.0 / (n as f64 - 1.0);
        let alpha = 3.0;
        let medium = homogeneous(n, n, h, alpha);
        let pulse = GaussianPulse {
            x0: 0.5,
            z0: 0.5,
            width: 0.03,
            amplitude: 1.0,
            kind: SourceKind::Displacement,
        };
        // Front reaches ~0.36 by t_end; boundaries stay untouched.
        let t_end = 0.12;
        let cfg = WaveRunConfig {
            t_end,
            dt: None,
            cfl_safety: 0.5,
            receivers: vec![],
            snapshot_times: vec![t_end],
            sponge_cells: 0,
            store_every: 1,
        };
        let run = solve_wave(&medium, &pulse, &cfg).unwrap();
        let dt = run.dt;
        let energy = |a: &Array2<f64>, b: &Array2<f64>| -> f64 {
            // Kinetic + gradient energy at the half step.
            let mut e = 0.0;
            let mid = (a + b) * 0.5;
            let (gx, gz) = gradient(&mid, h, h);
            for i in 1..n - 1 {
                for j in 1..n - 1 {
                    let vel = (b[(i, j)] - a[(i, j)]) / dt;
                    e += vel * vel / (alpha * alpha) + gx[(i, j)] * gx[(i, j)]
                        + gz[(i, j)] * gz[(i, j)];
                }
            }
            e * 0.5 * h * h
        };
        // Skip the start-up transient of the ring formation.
        let quarter = run.frames.len() / 4;
        let e0 = energy(&run.frames[quarter], &run.frames[quarter + 1]);
        let e1 = energy(
            &run.frames[run.frames.len() - 2],
            &run.frames[run.frames.len() - 1],
        );
        let drift = ((e1 - e0) / e0).abs();
        assert!(drift <= 0.005, "energy drift {drift}");
    }

    #[test]
    fn trace_csv_roundtrip() {
        let medium = homogeneous(32, 32, 0.01, 3.0);
        let cfg = WaveRunConfig {
            t_end: 0.02,
            dt: None,
            cfl_safety: 0.8,
            receivers: vec![0.05, 0.15, 0.25],
            snapshot_times: vec![],
            sponge_cells: 4,
            store_every: 64,
        };
        let pulse = GaussianPulse {
            x0: 0.15,
            z0: 0.15,
            width: 0.03,
            amplitude: 1.0,
            kind: SourceKind::Displacement,
        };
        let run = solve_wave(&medium, &pulse, &cfg).unwrap();
        let mut buf = Vec::new();
        run.write_traces_csv(&mut buf).unwrap();
        let (times, traces) = WaveRun::read_traces_csv(buf.as_slice()).unwrap();
        assert_eq!(times.len(), run.trace_times.len());
        assert_eq!(traces, run.traces);
        // One sample per time step.
        assert_eq!(times.len(), (cfg.t_end / run.dt).round() as usize + 1);
    }
}
