//! Static plot emission from a run directory.

use super::cases::{burgers_case, CaseId};
use super::config::ResolvedConfig;
use super::run::{read_pair_checkpoint, RunArtifacts, SeriesAnalysis};
use super::svg::{heatmap, line_plot, stem_plot, LineSeries};
use crate::forward::Field;
use crate::inverse::{AlphaField, BurgersTrace, InputScaling, ScaledNet, TrainedPair};
use crate::{Error, Result};
use std::path::{Path, PathBuf};

/// Emits the case plots from artifacts on disk and returns their paths.
///
/// Line and stem plots always appear; the field heat maps are added
/// when the reference field and a checkpoint are available.
pub fn make_plots(artifacts: &RunArtifacts) -> Result<Vec<PathBuf>> {
    let dir = &artifacts.out_dir;
    let missing: Vec<String> = required_inputs(artifacts)
        .into_iter()
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::contract(format!(
            "missing plot inputs: {}",
            missing.join(", ")
        )));
    }
    let plots_dir = dir.join("plots");
    std::fs::create_dir_all(&plots_dir)?;
    let case = CaseId::parse(&artifacts.case)?;
    if case.is_wave() {
        wave_plots(artifacts, &plots_dir)
    } else {
        burgers_plots(artifacts, case, &plots_dir)
    }
}

fn required_inputs(artifacts: &RunArtifacts) -> Vec<PathBuf> {
    let mut paths = vec![artifacts.trace_path.clone()];
    paths.extend(artifacts.report_paths.iter().cloned());
    paths
}

fn load_analysis(path: &Path) -> Result<SeriesAnalysis> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn burgers_plots(
    artifacts: &RunArtifacts,
    case: CaseId,
    plots_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let trace = BurgersTrace::read_csv(std::fs::File::open(&artifacts.trace_path)?)?;
    let schedules = burgers_case(case).ok();
    let mut out = Vec::new();

    for (name, values, truth) in [
        (
            "lambda1",
            &trace.lambda1,
            schedules.as_ref().map(|c| &c.lam1),
        ),
        (
            "lambda2",
            &trace.lambda2,
            schedules.as_ref().map(|c| &c.lam2),
        ),
    ] {
        let mut series = vec![LineSeries {
            xs: &trace.times,
            ys: values,
            label: "inferred",
            color: "#c0392b",
            dashed: false,
        }];
        let truth_vals: Vec<f64>;
        if let Some(schedule) = truth {
            truth_vals = trace.times.iter().map(|&t| schedule.eval(t)).collect();
            series.push(LineSeries {
                xs: &trace.times,
                ys: &truth_vals,
                label: "reference",
                color: "#2c3e50",
                dashed: true,
            });
        }
        let svg = line_plot(&format!("{name} over time"), "t", name, &series);
        let path = plots_dir.join(format!("{name}.svg"));
        std::fs::write(&path, svg)?;
        out.push(path);
    }

    // Probability stems from the lambda1 report.
    let analysis = load_analysis(&artifacts.report_paths[0])?;
    let probs = &analysis.report.probabilities;
    let times: Vec<f64> = (0..probs.len()).map(|j| trace.times[j + 1]).collect();
    let svg = stem_plot(
        "change probability",
        "t",
        "p",
        &times,
        probs,
        Some(analysis.report.threshold),
    );
    let path = plots_dir.join("probability.svg");
    std::fs::write(&path, svg)?;
    out.push(path);

    // Field heat maps when the reference field and checkpoint exist.
    let field_path = artifacts.out_dir.join("field.csv");
    if field_path.exists() && !artifacts.checkpoint_paths.is_empty() {
        let field = Field::load_csv(&field_path)?;
        let (backbone, subnet) = read_pair_checkpoint(&artifacts.checkpoint_paths[0])?;
        let cfg_text = std::fs::read_to_string(&artifacts.config_path)?;
        let resolved = ResolvedConfig::from_toml(&cfg_text)?;
        let grid = resolved
            .grid()
            .ok_or_else(|| Error::contract("missing grid in config"))?;
        let pair = TrainedPair {
            backbone: ScaledNet::new(
                backbone,
                InputScaling::from_ranges(&[(grid.x_min, grid.x_max), (0.0, grid.t_end)]),
            ),
            subnet: ScaledNet::new(subnet, InputScaling::from_ranges(&[(0.0, grid.t_end)])),
        };
        let xs = &field.axes[0].coords;
        let ts = &field.axes[1].coords;
        let mut pts = ndarray::Array2::zeros((2, xs.len() * ts.len()));
        let mut c = 0;
        for &x in xs {
            for &t in ts {
                pts[(0, c)] = x;
                pts[(1, c)] = t;
                c += 1;
            }
        }
        let pred = pair.backbone.forward(pts.view())?;
        let predicted: Vec<f64> = (0..pts.ncols()).map(|c| pred[(0, c)]).collect();
        let abs_err: Vec<f64> = predicted
            .iter()
            .zip(&field.values)
            .map(|(p, r)| (p - r).abs())
            .collect();
        let extent = (
            ts[0],
            *ts.last().unwrap(),
            xs[0],
            *xs.last().unwrap(),
        );
        // Transpose to (t, x) panels so time runs along the x axis.
        let nx = xs.len();
        let nt = ts.len();
        let transpose = |v: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; v.len()];
            for i in 0..nx {
                for j in 0..nt {
                    out[j * nx + i] = v[i * nt + j];
                }
            }
            out
        };
        for (name, values) in [
            ("u_reference", &field.values),
            ("u_predicted", &predicted),
            ("u_abs_error", &abs_err),
        ] {
            let svg = heatmap(name, "t", "x", &transpose(values), nt, nx, extent);
            let path = plots_dir.join(format!("{name}.svg"));
            std::fs::write(&path, svg)?;
            out.push(path);
        }
    }
    Ok(out)
}

fn wave_plots(artifacts: &RunArtifacts, plots_dir: &Path) -> Result<Vec<PathBuf>> {
    let inferred = AlphaField::read_csv(std::fs::File::open(&artifacts.trace_path)?)?;
    let mut out = Vec::new();
    let extent = (
        inferred.xs[0],
        *inferred.xs.last().unwrap(),
        inferred.zs[0],
        *inferred.zs.last().unwrap(),
    );
    let (nx, nz) = inferred.alpha.dim();
    // z grows downward in the medium; flip so the surface is on top.
    let flip = |a: &ndarray::Array2<f64>| -> Vec<f64> {
        let (nx, nz) = a.dim();
        let mut v = Vec::with_capacity(nx * nz);
        for i in 0..nx {
            for j in 0..nz {
                v.push(a[(i, nz - 1 - j)]);
            }
        }
        v
    };

    let truth_path = artifacts.out_dir.join("alpha_truth.csv");
    if truth_path.exists() {
        let truth = AlphaField::read_csv(std::fs::File::open(&truth_path)?)?;
        let svg = heatmap(
            "reference wave speed",
            "x",
            "z (surface up)",
            &flip(&truth.alpha),
            truth.alpha.dim().0,
            truth.alpha.dim().1,
            extent,
        );
        let path = plots_dir.join("alpha_reference.svg");
        std::fs::write(&path, svg)?;
        out.push(path);
    }

    let svg = heatmap(
        "inferred wave speed",
        "x",
        "z (surface up)",
        &flip(&inferred.alpha),
        nx,
        nz,
        extent,
    );
    let path = plots_dir.join("alpha_inferred.svg");
    std::fs::write(&path, svg)?;
    out.push(path);

    // Probability field from the report.
    let report_text = std::fs::read_to_string(&artifacts.report_paths[0])?;
    let report: serde_json::Value = serde_json::from_str(&report_text)?;
    if let Some(fr) = report.get("field_report") {
        let mask: Vec<bool> = serde_json::from_value(fr["change_mask"].clone())?;
        let shape: (usize, usize) = serde_json::from_value(fr["shape"].clone())?;
        let values: Vec<f64> = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        let grid = ndarray::Array2::from_shape_vec(shape, values)
            .map_err(|e| Error::contract(e.to_string()))?;
        let svg = heatmap(
            "change-probability exceedances",
            "x",
            "z (surface up)",
            &flip(&grid),
            shape.0,
            shape.1,
            extent,
        );
        let path = plots_dir.join("probability.svg");
        std::fs::write(&path, svg)?;
        out.push(path);
    }
    Ok(out)
}
