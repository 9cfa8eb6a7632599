//! Comparing run artifacts against per-case expectations.

use super::cases::CaseId;
use super::run::{RunArtifacts, SeriesAnalysis};
use crate::inverse::BurgersTrace;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Tolerances for one case. Any field left out is skipped.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CaseExpectations {
    /// Expected per-segment medians of lambda1, in order.
    pub lambda1_segment_medians: Option<Vec<f64>>,
    pub lambda1_rel_tol: Option<f64>,
    pub lambda2_segment_medians: Option<Vec<f64>>,
    pub lambda2_rel_tol: Option<f64>,
    /// Exact merged-region count for lambda1.
    pub n_regions: Option<usize>,
    /// Times that must fall inside some merged region.
    pub region_contains_times: Option<Vec<f64>>,
    /// Expected region centres (times) with a tolerance in trace steps.
    pub region_centers_t: Option<Vec<f64>>,
    pub region_center_tol_steps: Option<f64>,
    /// Upper bound on the trace-vs-truth relative L2 errors.
    pub lambda1_rel_l2_max: Option<f64>,
    pub lambda2_rel_l2_max: Option<f64>,
    pub u_rel_l2_max: Option<f64>,
    /// Wave-case checks.
    pub iou_min: Option<f64>,
    pub cluster_means_ordered: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Expectations {
    #[serde(default)]
    pub cases: BTreeMap<String, CaseExpectations>,
}

impl Expectations {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format("expectations", e.to_string()))
    }

    /// Acceptance-grade defaults for the named cases.
    pub fn builtin() -> Self {
        let mut cases = BTreeMap::new();
        cases.insert(
            "c1_1".to_string(),
            CaseExpectations {
                lambda1_segment_medians: Some(vec![1.5]),
                lambda1_rel_tol: Some(5e-2),
                n_regions: Some(0),
                ..Default::default()
            },
        );
        cases.insert(
            "c1_2".to_string(),
            CaseExpectations {
                lambda1_segment_medians: Some(vec![0.5, 1.0]),
                lambda1_rel_tol: Some(5e-2),
                n_regions: Some(1),
                region_contains_times: Some(vec![5.0]),
                ..Default::default()
            },
        );
        cases.insert(
            "c2_1".to_string(),
            CaseExpectations {
                lambda1_segment_medians: Some(vec![0.5, 1.0, 0.5]),
                lambda1_rel_tol: Some(5e-2),
                region_contains_times: Some(vec![4.0, 5.0]),
                ..Default::default()
            },
        );
        cases.insert(
            "c2_2".to_string(),
            CaseExpectations {
                lambda1_segment_medians: Some(vec![1.0, 0.5, 0.75, 0.5]),
                lambda1_rel_tol: Some(5e-2),
                region_contains_times: Some(vec![2.0, 4.0, 8.0]),
                ..Default::default()
            },
        );
        cases.insert(
            "c3".to_string(),
            CaseExpectations {
                lambda2_segment_medians: Some(vec![1.0, 1.33, 2.0, 1.33, 1.0]),
                lambda2_rel_tol: Some(8e-2),
                region_centers_t: Some(vec![2.0, 4.0, 6.0, 8.0]),
                region_center_tol_steps: Some(2.0),
                ..Default::default()
            },
        );
        cases.insert(
            "wave_ellipse".to_string(),
            CaseExpectations {
                iou_min: Some(0.5),
                cluster_means_ordered: Some(true),
                ..Default::default()
            },
        );
        Expectations { cases }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyRow {
    pub check: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub case: String,
    pub rows: Vec<VerifyRow>,
    pub passed: bool,
    pub vacuous: bool,
}

impl VerifyOutcome {
    pub fn table(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&format!(
                "{:40} expected {:24} actual {:24} {}\n",
                row.check,
                row.expected,
                row.actual,
                if row.pass { "PASS" } else { "FAIL" }
            ));
        }
        out.push_str(&format!(
            "verify {}: {}\n",
            self.case,
            if self.vacuous {
                "VACUOUS PASS (no expectations for this case)"
            } else if self.passed {
                "PASS"
            } else {
                "FAIL"
            }
        ));
        out
    }
}

fn load_analysis(path: &Path) -> Result<SeriesAnalysis> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Checks a finished run directory against expectations (built-in
/// defaults when `expectations` is `None`).
pub fn verify(run_dir: &Path, expectations: Option<&Expectations>) -> Result<VerifyOutcome> {
    let artifacts = RunArtifacts::load(run_dir)?;
    let builtin = Expectations::builtin();
    let exp = expectations.unwrap_or(&builtin);
    let case = artifacts.case.clone();
    let Some(case_exp) = exp.cases.get(&case) else {
        return Ok(VerifyOutcome {
            case,
            rows: vec![],
            passed: true,
            vacuous: true,
        });
    };
    let mut rows: Vec<VerifyRow> = Vec::new();
    let mut check = |name: String, expected: String, actual: String, pass: bool| {
        rows.push(VerifyRow {
            check: name,
            expected,
            actual,
            pass,
        });
    };

    if let Some(failure) = &artifacts.failure {
        check(
            "run completed".into(),
            "no failure".into(),
            failure.clone(),
            false,
        );
        return Ok(VerifyOutcome {
            case,
            rows,
            passed: false,
            vacuous: false,
        });
    }

    let case_id = CaseId::parse(&case)?;
    if case_id.is_wave() {
        let summary: super::run::RunSummary =
            serde_json::from_str(&std::fs::read_to_string(&artifacts.summary_path)?)?;
        let wave = summary
            .wave
            .ok_or_else(|| Error::format("summary.json", "missing wave section"))?;
        if let Some(min) = case_exp.iou_min {
            check(
                "anomaly IoU".into(),
                format!(">= {min}"),
                format!("{:.4}", wave.anomaly_iou),
                wave.anomaly_iou >= min,
            );
        }
        if case_exp.cluster_means_ordered == Some(true) {
            let ordered = wave.cluster_means.windows(2).all(|w| w[0] < w[1]);
            check(
                "cluster means ordered (inside < outside)".into(),
                "ascending".into(),
                format!("{:?}", wave.cluster_means),
                ordered,
            );
        }
    } else {
        let trace = BurgersTrace::read_csv(std::fs::File::open(&artifacts.trace_path)?)?;
        if trace.times.is_empty()
            || trace.lambda1.iter().any(|v| !v.is_finite())
            || trace.lambda2.iter().any(|v| !v.is_finite())
        {
            check(
                "trace well-formed".into(),
                "finite values".into(),
                "corrupted trace".into(),
                false,
            );
            return Ok(VerifyOutcome {
                case,
                rows,
                passed: false,
                vacuous: false,
            });
        }
        let a1 = load_analysis(&artifacts.report_paths[0])?;
        let a2 = load_analysis(&artifacts.report_paths[1])?;
        let dt = trace.times[1] - trace.times[0];

        for (name, exp_meds, tol, analysis) in [
            (
                "lambda1",
                &case_exp.lambda1_segment_medians,
                case_exp.lambda1_rel_tol.unwrap_or(5e-2),
                &a1,
            ),
            (
                "lambda2",
                &case_exp.lambda2_segment_medians,
                case_exp.lambda2_rel_tol.unwrap_or(5e-2),
                &a2,
            ),
        ] {
            if let Some(expected) = exp_meds {
                let actual: Vec<f64> =
                    analysis.report.segments.iter().map(|s| s.median).collect();
                let count_ok = actual.len() == expected.len();
                let mut values_ok = count_ok;
                if count_ok {
                    for (a, e) in actual.iter().zip(expected) {
                        if (a - e).abs() > tol * e.abs().max(1e-12) {
                            values_ok = false;
                        }
                    }
                }
                check(
                    format!("{name} segment medians (rel tol {tol})"),
                    format!("{expected:?}"),
                    format!("{actual:?}"),
                    values_ok,
                );
            }
        }

        if let Some(n) = case_exp.n_regions {
            check(
                "merged region count (lambda1)".into(),
                format!("{n}"),
                format!("{}", a1.report.regions.len()),
                a1.report.regions.len() == n,
            );
        }
        if let Some(times) = &case_exp.region_contains_times {
            for &t in times {
                let hit = a1.report.regions.iter().any(|r| {
                    let t_start = trace.times[r.start];
                    let t_end = trace.times[r.end];
                    // Widen by one step: the window centred at the jump
                    // index straddles it.
                    (t_start - dt..=t_end + dt).contains(&t)
                });
                check(
                    format!("some region contains t = {t}"),
                    "inside a merged region".into(),
                    format!(
                        "{:?}",
                        a1.report
                            .regions
                            .iter()
                            .map(|r| (trace.times[r.start], trace.times[r.end]))
                            .collect::<Vec<_>>()
                    ),
                    hit,
                );
            }
        }
        if let Some(centers) = &case_exp.region_centers_t {
            let tol_steps = case_exp.region_center_tol_steps.unwrap_or(2.0);
            let actual: Vec<f64> = a1
                .report
                .regions
                .iter()
                .map(|r| {
                    let c = r.center();
                    let lo = c.floor() as usize;
                    let frac = c - lo as f64;
                    trace.times[lo] + frac * dt
                })
                .collect();
            let mut ok = actual.len() == centers.len();
            if ok {
                for (a, e) in actual.iter().zip(centers) {
                    if (a - e).abs() > tol_steps * dt {
                        ok = false;
                    }
                }
            }
            check(
                format!("region centres within {tol_steps} steps"),
                format!("{centers:?}"),
                format!(
                    "{:?}",
                    actual.iter().map(|a| (a * 1e3).round() / 1e3).collect::<Vec<_>>()
                ),
                ok,
            );
        }
        for (name, max, actual) in [
            ("lambda1 rel L2", case_exp.lambda1_rel_l2_max, a1.rel_l2),
            ("lambda2 rel L2", case_exp.lambda2_rel_l2_max, a2.rel_l2),
        ] {
            if let (Some(max), Some(actual)) = (max, actual) {
                check(
                    name.into(),
                    format!("<= {max}"),
                    format!("{actual:.3e}"),
                    actual <= max,
                );
            }
        }
        if let Some(max) = case_exp.u_rel_l2_max {
            let summary: super::run::RunSummary =
                serde_json::from_str(&std::fs::read_to_string(&artifacts.summary_path)?)?;
            let actual = summary.u_rel_l2.unwrap_or(f64::INFINITY);
            check(
                "u field rel L2".into(),
                format!("<= {max}"),
                format!("{actual:.3e}"),
                actual <= max,
            );
        }
    }

    let passed = rows.iter().all(|r| r.pass);
    Ok(VerifyOutcome {
        case,
        rows,
        passed,
        vacuous: false,
    })
}
