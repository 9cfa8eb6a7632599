//! End-to-end case execution: generate, sample, train, detect, report.

use super::cases::{burgers_case, BurgersCase};
use super::config::{ExperimentConfig, ResolvedConfig};
use super::plots;
use crate::changepoint::{
    change_prob_1d, change_prob_2d, cusum_detect, detect, detect_field, em_fit_1d,
    relative_l2, responsibilities, segment_summary, select_k, ChangePointReport, CusumConfig,
    GmmInit, GmmModel, SummaryRow,
};
use crate::forward::{
    sample_observations, solve_burgers, solve_wave, Field, GaussianPulse, SourceKind, WaveMedium,
    WaveRunConfig,
};
use crate::inverse::{train_burgers, train_wave, BurgersTrace, LossRecord, TrainedPair};
use crate::net::{read_checkpoint, write_checkpoint, MlpParams};
use crate::{Error, Result};
use ndarray::{Array2, Array3, ArrayView2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Everything a finished (or failed) run left on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub case: String,
    pub config_path: PathBuf,
    pub config_hash: String,
    pub data_paths: Vec<PathBuf>,
    pub checkpoint_paths: Vec<PathBuf>,
    pub trace_path: PathBuf,
    pub loss_path: PathBuf,
    pub report_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
    pub plot_paths: Vec<PathBuf>,
    /// Wall-clock seconds per phase.
    pub phase_seconds: BTreeMap<String, f64>,
    /// Set when a phase failed; earlier artifacts remain valid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl RunArtifacts {
    fn new(out_dir: &Path, case: &str) -> Self {
        RunArtifacts {
            out_dir: out_dir.to_path_buf(),
            case: case.to_string(),
            config_path: out_dir.join("config.toml"),
            config_hash: String::new(),
            data_paths: Vec::new(),
            checkpoint_paths: Vec::new(),
            trace_path: out_dir.join("trace.csv"),
            loss_path: out_dir.join("loss.csv"),
            report_paths: Vec::new(),
            summary_path: out_dir.join("summary.json"),
            plot_paths: Vec::new(),
            phase_seconds: BTreeMap::new(),
            failure: None,
        }
    }

    pub fn save(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(self.out_dir.join("artifacts.json"), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join("artifacts.json"))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Detection products for one coefficient series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesAnalysis {
    pub name: String,
    pub chosen_k: usize,
    pub report: ChangePointReport,
    pub mixture_rows: Vec<SummaryRow>,
    /// Relative L2 against the schedule, when ground truth is known.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_l2: Option<f64>,
}

/// Run-level summary written next to the reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub case: String,
    pub preset: String,
    pub seed: u64,
    pub sampling: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u_rel_l2: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub transition_path: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wave: Option<WaveSummary>,
}

/// Wave-case classification summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveSummary {
    /// Mixture means sorted ascending (anomaly first for a low-velocity body).
    pub cluster_means: Vec<f64>,
    pub cluster_ratios: Vec<f64>,
    /// Intersection-over-union of the classified anomaly vs the configured ellipse.
    pub anomaly_iou: f64,
    pub super_threshold_nodes: usize,
}

fn write_loss_csv(path: &Path, records: &[LossRecord]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "epoch,mse_o,mse_r,total")?;
    for r in records {
        writeln!(f, "{},{:?},{:?},{:?}", r.epoch, r.mse_o, r.mse_r, r.total)?;
    }
    Ok(())
}

pub fn read_loss_csv(path: &Path) -> Result<Vec<LossRecord>> {
    use std::io::BufRead;
    let bad = |d: &str| Error::format("loss.csv", d);
    let mut lines = std::io::BufReader::new(std::fs::File::open(path)?).lines();
    let header = lines.next().ok_or_else(|| bad("empty"))??;
    if header.trim() != "epoch,mse_o,mse_r,total" {
        return Err(bad("unexpected header"));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(bad("bad column count"));
        }
        out.push(LossRecord {
            epoch: cols[0].trim().parse().map_err(|_| bad("bad epoch"))?,
            mse_o: cols[1].trim().parse().map_err(|_| bad("bad mse_o"))?,
            mse_r: cols[2].trim().parse().map_err(|_| bad("bad mse_r"))?,
            total: cols[3].trim().parse().map_err(|_| bad("bad total"))?,
        });
    }
    Ok(out)
}

/// Backbone + subnet written back-to-back as two checkpoint records.
pub fn write_pair_checkpoint(path: &Path, pair: &TrainedPair) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(&mut f, &pair.backbone.params)?;
    write_checkpoint(&mut f, &pair.subnet.params)?;
    Ok(())
}

pub fn read_pair_checkpoint(path: &Path) -> Result<(MlpParams, MlpParams)> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let backbone = read_checkpoint(&mut f)?;
    let subnet = read_checkpoint(&mut f)?;
    Ok((backbone, subnet))
}

/// GMM + change-probability + threshold analysis of one scalar series.
pub fn analyze_series(
    name: &str,
    trace: &[f64],
    truth: Option<&[f64]>,
    distinct_truth: Option<Vec<f64>>,
    det: &super::config::DetectionConfig,
    cusum_alpha: f64,
    seed: u64,
) -> Result<SeriesAnalysis> {
    let view = ArrayView2::from_shape((trace.len(), 1), trace)
        .map_err(|e| Error::contract(e.to_string()))?;
    let (k, _) = select_k(view, det.k_max, det.k_min_proportion, seed)?;
    let model = em_fit_1d(
        trace,
        k,
        &GmmInit::KmeansPlusPlus {
            restarts: det.em_restarts,
        },
        det.em_tol,
        det.em_max_iter,
        seed,
    )?;
    let resp = responsibilities(&model, view)?;
    let probs = change_prob_1d(resp.view())?;
    let mut report = detect(trace, &probs, det.threshold)?;
    report.cusum = Some(cusum_detect(trace, &CusumConfig { alpha: cusum_alpha })?);
    let mixture_rows = segment_summary(&model, distinct_truth.as_deref())?;
    let rel_l2 = truth.map(|t| relative_l2(trace, t));
    Ok(SeriesAnalysis {
        name: name.to_string(),
        chosen_k: k,
        report,
        mixture_rows,
        rel_l2,
    })
}

/// How far along the pipeline a command runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RunPhase {
    Generate,
    Train,
    Full,
}

/// Executes the whole pipeline for one case. Phase failures are recorded
/// in the returned artifacts rather than aborting the caller.
pub fn run_case(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    run_case_upto(cfg, RunPhase::Full)
}

pub fn run_case_upto(cfg: &ExperimentConfig, upto: RunPhase) -> Result<RunArtifacts> {
    let resolved = cfg.resolve()?;
    std::fs::create_dir_all(&cfg.out_dir)?;
    std::fs::create_dir_all(cfg.out_dir.join("checkpoints"))?;
    std::fs::create_dir_all(cfg.out_dir.join("plots"))?;
    let mut artifacts = RunArtifacts::new(&cfg.out_dir, cfg.case.name());
    artifacts.config_hash = resolved.hash()?;
    std::fs::write(&artifacts.config_path, resolved.to_toml()?)?;

    let outcome = if cfg.case.is_wave() {
        run_wave_case(cfg, &resolved, &mut artifacts, upto)
    } else {
        run_burgers_case(cfg, &resolved, &mut artifacts, upto)
    };
    if let Err(err) = outcome {
        artifacts.failure = Some(err.to_string());
        // Divergence carries the last finite state; persist it.
        if let Error::Diverged { checkpoint, epoch } = &err {
            let path = cfg
                .out_dir
                .join("checkpoints")
                .join(format!("step_{epoch}_diverged.vcnet"));
            if write_pair_checkpoint(&path, checkpoint).is_ok() {
                artifacts.checkpoint_paths.push(path);
            }
        }
    }
    artifacts.save()?;
    Ok(artifacts)
}

fn time_phase<T>(
    artifacts: &mut RunArtifacts,
    name: &str,
    f: impl FnOnce(&mut RunArtifacts) -> Result<T>,
) -> Result<T> {
    let t0 = Instant::now();
    let out = f(artifacts);
    artifacts
        .phase_seconds
        .insert(name.to_string(), t0.elapsed().as_secs_f64());
    out
}

fn run_burgers_case(
    cfg: &ExperimentConfig,
    resolved: &ResolvedConfig,
    artifacts: &mut RunArtifacts,
    upto: RunPhase,
) -> Result<()> {
    let case = burgers_case(cfg.case)?;
    let data_cfg = resolved.burgers_data.as_ref().unwrap();
    let train_cfg = resolved.burgers_train.as_ref().unwrap();
    let grid = resolved.grid().unwrap();

    // generate
    let field = time_phase(artifacts, "generate", |artifacts| {
        let field = solve_burgers(&grid, &case.lam1, &case.lam2)?;
        let path = cfg.out_dir.join("field.csv");
        field.save_csv(&path)?;
        artifacts.data_paths.push(path);
        Ok(field)
    })?;
    if upto == RunPhase::Generate {
        return Ok(());
    }

    // sample
    let observations = time_phase(artifacts, "sample", |_| {
        sample_observations(&field, data_cfg.n_o, cfg.seed)
    })?;

    // train
    let training = time_phase(artifacts, "train", |artifacts| {
        let training = train_burgers(&observations, train_cfg)?;
        let mut buf = Vec::new();
        training.trace.write_csv(&mut buf)?;
        std::fs::write(&artifacts.trace_path, buf)?;
        write_loss_csv(&artifacts.loss_path, &training.losses)?;
        let ckpt = cfg
            .out_dir
            .join("checkpoints")
            .join(format!("step_{}.vcnet", train_cfg.epochs));
        write_pair_checkpoint(&ckpt, &training.pair)?;
        artifacts.checkpoint_paths.push(ckpt);
        Ok(training)
    })?;
    if upto == RunPhase::Train {
        return Ok(());
    }

    burgers_detect_phase(cfg, resolved, artifacts, &case, &training.trace)?;

    // plots
    time_phase(artifacts, "plot", |artifacts| {
        let paths = plots::make_plots(artifacts)?;
        artifacts.plot_paths = paths;
        Ok(())
    })?;
    Ok(())
}

/// Detection + summary from a trace (used by full runs and by `detect`
/// on an existing run directory).
fn burgers_detect_phase(
    cfg: &ExperimentConfig,
    resolved: &ResolvedConfig,
    artifacts: &mut RunArtifacts,
    case: &BurgersCase,
    trace: &BurgersTrace,
) -> Result<()> {
    let grid = resolved.grid().unwrap();
    let train_cfg = resolved.burgers_train.as_ref().unwrap();
    let analysis1 = time_phase(artifacts, "detect", |artifacts| {
        let truth1: Vec<f64> = trace.times.iter().map(|&t| case.lam1.eval(t)).collect();
        let truth2: Vec<f64> = trace.times.iter().map(|&t| case.lam2.eval(t)).collect();
        let distinct1 = BurgersCase::distinct_values(&case.lam1, grid.t_end, train_cfg.n_trace);
        let distinct2 = BurgersCase::distinct_values(&case.lam2, grid.t_end, train_cfg.n_trace);
        let analysis1 = analyze_series(
            "lambda1",
            &trace.lambda1,
            Some(&truth1),
            Some(distinct1),
            &resolved.detection,
            resolved.detection.cusum_alpha,
            cfg.seed,
        )?;
        let analysis2 = analyze_series(
            "lambda2",
            &trace.lambda2,
            Some(&truth2),
            Some(distinct2),
            &resolved.detection,
            resolved.detection.cusum_alpha,
            cfg.seed,
        )?;
        artifacts.report_paths.clear();
        for analysis in [&analysis1, &analysis2] {
            let path = cfg.out_dir.join(format!("report_{}.json", analysis.name));
            std::fs::write(&path, serde_json::to_string_pretty(analysis)?)?;
            artifacts.report_paths.push(path);
        }
        Ok(analysis1)
    })?;

    time_phase(artifacts, "summary", |artifacts| {
        // The field error needs the stored checkpoint and reference field.
        let field_path = cfg.out_dir.join("field.csv");
        let u_rel_l2 = match (artifacts.checkpoint_paths.first(), field_path.exists()) {
            (Some(ckpt), true) => {
                let field = Field::load_csv(&field_path)?;
                let (backbone, subnet) = read_pair_checkpoint(ckpt)?;
                let pair = TrainedPair {
                    backbone: crate::inverse::ScaledNet::new(
                        backbone,
                        crate::inverse::InputScaling::from_ranges(&[
                            (grid.x_min, grid.x_max),
                            (0.0, grid.t_end),
                        ]),
                    ),
                    subnet: crate::inverse::ScaledNet::new(
                        subnet,
                        crate::inverse::InputScaling::from_ranges(&[(0.0, grid.t_end)]),
                    ),
                };
                Some(predicted_field_error(&pair, &field)?)
            }
            _ => None,
        };
        let transition_path = transition_path(trace, &analysis1);
        let summary = RunSummary {
            case: resolved.case.clone(),
            preset: format!("{:?}", resolved.preset).to_lowercase(),
            seed: resolved.seed,
            sampling: resolved.sampling.clone(),
            u_rel_l2,
            transition_path,
            wave: None,
        };
        std::fs::write(&artifacts.summary_path, serde_json::to_string_pretty(&summary)?)?;
        Ok(())
    })
}

/// Re-runs detection and reporting on an existing run directory.
pub fn detect_existing(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let resolved_text = std::fs::read_to_string(cfg.out_dir.join("config.toml"))?;
    let resolved = ResolvedConfig::from_toml(&resolved_text)?;
    let mut artifacts = RunArtifacts::load(&cfg.out_dir).unwrap_or_else(|_| {
        RunArtifacts::new(&cfg.out_dir, &resolved.case)
    });
    if !artifacts.trace_path.exists() {
        return Err(Error::contract(format!(
            "no trace.csv in {}; run `train` first",
            cfg.out_dir.display()
        )));
    }
    let case_id = super::cases::CaseId::parse(&resolved.case)?;
    if case_id.is_wave() {
        let alpha = crate::inverse::AlphaField::read_csv(std::fs::File::open(
            &artifacts.trace_path,
        )?)?;
        wave_detect_phase(cfg, &resolved, &mut artifacts, &alpha)?;
    } else {
        let case = burgers_case(case_id)?;
        let trace = BurgersTrace::read_csv(std::fs::File::open(&artifacts.trace_path)?)?;
        burgers_detect_phase(cfg, &resolved, &mut artifacts, &case, &trace)?;
    }
    artifacts.save()?;
    Ok(artifacts)
}

/// Predicted-vs-reference relative L2 of the field on its grid.
fn predicted_field_error(pair: &TrainedPair, field: &Field) -> Result<f64> {
    let xs = &field.axes[0].coords;
    let ts = &field.axes[1].coords;
    let mut pts = Array2::zeros((2, xs.len() * ts.len()));
    let mut c = 0;
    for &x in xs {
        for &t in ts {
            pts[(0, c)] = x;
            pts[(1, c)] = t;
            c += 1;
        }
    }
    let pred = pair.backbone.forward(pts.view())?;
    let pred: Vec<f64> = (0..pts.ncols()).map(|c| pred[(0, c)]).collect();
    Ok(relative_l2(&pred, &field.values))
}

/// Ordered coefficient states between merged change regions, read off
/// the lambda1 segmentation.
fn transition_path(trace: &BurgersTrace, analysis1: &SeriesAnalysis) -> Vec<(f64, f64)> {
    analysis1
        .report
        .segments
        .iter()
        .map(|seg| {
            let l2_slice = &trace.lambda2[seg.start..=seg.end];
            let mut sorted = l2_slice.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            (seg.median, sorted[sorted.len() / 2])
        })
        .collect()
}

fn run_wave_case(
    cfg: &ExperimentConfig,
    resolved: &ResolvedConfig,
    artifacts: &mut RunArtifacts,
    upto: RunPhase,
) -> Result<()> {
    let data_cfg = resolved.wave_data.as_ref().unwrap();
    let train_cfg = resolved.wave_train.as_ref().unwrap();

    // generate
    let run = time_phase(artifacts, "generate", |artifacts| {
        let alpha = data_cfg.anomaly.speed_field(
            data_cfg.nx,
            data_cfg.nz,
            train_cfg.x_extent,
            train_cfg.z_extent,
        );
        let medium = WaveMedium {
            nx: data_cfg.nx,
            nz: data_cfg.nz,
            dx: train_cfg.x_extent / (data_cfg.nx - 1) as f64,
            dz: train_cfg.z_extent / (data_cfg.nz - 1) as f64,
            alpha,
            rho: train_cfg.rho,
        };
        let pulse = GaussianPulse {
            x0: data_cfg.source_x,
            z0: data_cfg.source_z,
            width: data_cfg.source_width,
            amplitude: 1.0,
            kind: SourceKind::Displacement,
        };
        let run_cfg = WaveRunConfig {
            t_end: data_cfg.t_end,
            dt: None,
            cfl_safety: data_cfg.cfl_safety,
            receivers: WaveRunConfig::equispaced_receivers(
                data_cfg.n_receivers,
                train_cfg.x_extent,
            ),
            snapshot_times: data_cfg.snapshot_times.clone(),
            sponge_cells: data_cfg.sponge_cells,
            store_every: 1_000_000,
        };
        let run = solve_wave(&medium, &pulse, &run_cfg)?;
        let path = cfg.out_dir.join("traces.csv");
        let mut buf = Vec::new();
        run.write_traces_csv(&mut buf)?;
        std::fs::write(&path, buf)?;
        artifacts.data_paths.push(path);
        // Ground-truth speed field for plots.
        let truth_path = cfg.out_dir.join("alpha_truth.csv");
        let truth = crate::inverse::AlphaField {
            xs: run.xs.clone(),
            zs: run.zs.clone(),
            alpha: medium.alpha.clone(),
        };
        let mut buf = Vec::new();
        truth.write_csv(&mut buf)?;
        std::fs::write(&truth_path, buf)?;
        artifacts.data_paths.push(truth_path);
        Ok(run)
    })?;
    if upto == RunPhase::Generate {
        return Ok(());
    }

    // train
    let training = time_phase(artifacts, "train", |artifacts| {
        let training = train_wave(&run, train_cfg)?;
        let mut buf = Vec::new();
        training.alpha.write_csv(&mut buf)?;
        std::fs::write(&artifacts.trace_path, buf)?;
        write_loss_csv(&artifacts.loss_path, &training.losses)?;
        let ckpt = cfg.out_dir.join("checkpoints").join("step_final.vcnet");
        write_pair_checkpoint(&ckpt, &training.pair)?;
        artifacts.checkpoint_paths.push(ckpt);
        Ok(training)
    })?;
    if upto == RunPhase::Train {
        return Ok(());
    }

    wave_detect_phase(cfg, resolved, artifacts, &training.alpha)?;

    // plots
    time_phase(artifacts, "plot", |artifacts| {
        let paths = plots::make_plots(artifacts)?;
        artifacts.plot_paths = paths;
        Ok(())
    })?;
    Ok(())
}

fn wave_detect_phase(
    cfg: &ExperimentConfig,
    resolved: &ResolvedConfig,
    artifacts: &mut RunArtifacts,
    alpha: &crate::inverse::AlphaField,
) -> Result<()> {
    let data_cfg = resolved.wave_data.as_ref().unwrap();
    let train_cfg = resolved.wave_train.as_ref().unwrap();
    time_phase(artifacts, "detect", |artifacts| {
        let (model, resp, field_report, iou) = classify_alpha(
            &alpha.alpha,
            &data_cfg.anomaly,
            train_cfg.x_extent,
            train_cfg.z_extent,
            &resolved.detection,
            cfg.seed,
        )?;
        let report_path = cfg.out_dir.join("report_alpha.json");
        let payload = serde_json::json!({
            "mode": "value",
            "k": model.k,
            "means": model.means.iter().map(|m| m[0]).collect::<Vec<_>>(),
            "variances": model.covs.iter().map(|c| c[0]).collect::<Vec<_>>(),
            "proportions": model.proportions,
            "field_report": field_report,
        });
        std::fs::write(&report_path, serde_json::to_string_pretty(&payload)?)?;
        artifacts.report_paths.push(report_path);

        let mut means: Vec<f64> = model.means.iter().map(|m| m[0]).collect();
        let mut ratios = model.proportions.clone();
        let order = {
            let mut idx: Vec<usize> = (0..means.len()).collect();
            idx.sort_by(|&a, &b| means[a].partial_cmp(&means[b]).unwrap());
            idx
        };
        means = order.iter().map(|&i| means[i]).collect();
        ratios = order.iter().map(|&i| ratios[i]).collect();
        let summary = RunSummary {
            case: resolved.case.clone(),
            preset: format!("{:?}", resolved.preset).to_lowercase(),
            seed: resolved.seed,
            sampling: resolved.sampling.clone(),
            u_rel_l2: None,
            transition_path: Vec::new(),
            wave: Some(WaveSummary {
                cluster_means: means,
                cluster_ratios: ratios,
                anomaly_iou: iou,
                super_threshold_nodes: field_report.change_count,
            }),
        };
        std::fs::write(&artifacts.summary_path, serde_json::to_string_pretty(&summary)?)?;
        let _ = resp;
        Ok(())
    })
}

/// Two-component mixture classification of an inferred speed field,
/// change probabilities over the cross-shaped neighbourhood, and the
/// anomaly IoU against the configured ellipse.
pub fn classify_alpha(
    alpha: &Array2<f64>,
    anomaly: &super::cases::EllipseAnomaly,
    x_extent: f64,
    z_extent: f64,
    det: &super::config::DetectionConfig,
    seed: u64,
) -> Result<(GmmModel, Array2<f64>, crate::changepoint::FieldReport, f64)> {
    let (nx, nz) = alpha.dim();
    let samples: Vec<f64> = alpha.iter().cloned().collect();
    let model = em_fit_1d(
        &samples,
        2,
        &GmmInit::KmeansPlusPlus {
            restarts: det.em_restarts,
        },
        det.em_tol,
        det.em_max_iter,
        seed,
    )?;
    let view = ArrayView2::from_shape((samples.len(), 1), &samples)
        .map_err(|e| Error::contract(e.to_string()))?;
    let resp = responsibilities(&model, view)?;
    let mut grid_resp = Array3::zeros((nx, nz, model.k));
    for i in 0..nx {
        for j in 0..nz {
            for k in 0..model.k {
                grid_resp[(i, j, k)] = resp[(i * nz + j, k)];
            }
        }
    }
    let probs = change_prob_2d(grid_resp.view())?;
    let field_report = detect_field(&probs, det.threshold);

    // Anomaly = the lower-mean component for a low-velocity body.
    let low = if model.means[0][0] <= model.means[1][0] { 0 } else { 1 };
    let truth_mask = anomaly.mask(nx, nz, x_extent, z_extent);
    let mut inter = 0usize;
    let mut union = 0usize;
    for i in 0..nx {
        for j in 0..nz {
            let predicted = resp[(i * nz + j, low)] > 0.5;
            let actual = truth_mask[i * nz + j];
            if predicted && actual {
                inter += 1;
            }
            if predicted || actual {
                union += 1;
            }
        }
    }
    let iou = if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    };
    Ok((model, probs, field_report, iou))
}

/// Joint classification over coordinates: a bivariate mixture fitted to
/// grid coordinates weighted by speed deficit. The alternative reading
/// of the classifier; the value mode above is the default.
pub fn classify_alpha_coordinates(
    alpha: &Array2<f64>,
    x_extent: f64,
    z_extent: f64,
    det: &super::config::DetectionConfig,
    seed: u64,
) -> Result<GmmModel> {
    let (nx, nz) = alpha.dim();
    let a_max = alpha.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut coords = Vec::with_capacity(nx * nz * 2);
    let mut weights = Vec::with_capacity(nx * nz);
    for i in 0..nx {
        for j in 0..nz {
            coords.push(x_extent * i as f64 / (nx - 1) as f64);
            coords.push(z_extent * j as f64 / (nz - 1) as f64);
            weights.push((a_max - alpha[(i, j)]).max(0.0));
        }
    }
    let view = ArrayView2::from_shape((nx * nz, 2), &coords)
        .map_err(|e| Error::contract(e.to_string()))?;
    crate::changepoint::em_fit_weighted(
        view,
        Some(&weights),
        1,
        &GmmInit::KmeansPlusPlus {
            restarts: det.em_restarts,
        },
        det.em_tol,
        det.em_max_iter,
        seed,
    )
}
