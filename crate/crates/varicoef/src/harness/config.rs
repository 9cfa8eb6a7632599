//! Experiment configuration: presets, overrides, and the resolved
//! per-module settings echoed into every run directory.

use super::cases::{CaseId, EllipseAnomaly};
use crate::forward::Grid1D;
use crate::inverse::{BurgersInverseConfig, NetSpec, WaveInverseConfig};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Paper,
    Desk,
}

impl Preset {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            other => Err(Error::contract(format!(
                "unknown preset '{other}' (expected paper or desk)"
            ))),
        }
    }
}

/// What the user asked for.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub case: CaseId,
    pub preset: Preset,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// `key=value` overrides applied after preset resolution.
    pub overrides: Vec<(String, String)>,
}

/// Detection settings shared by all cases.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub threshold: f64,
    pub k_max: usize,
    /// Smallest mixture proportion a state may carry during K selection.
    pub k_min_proportion: f64,
    pub cusum_alpha: f64,
    pub em_tol: f64,
    pub em_max_iter: usize,
    pub em_restarts: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            threshold: 1e-6,
            k_max: 5,
            k_min_proportion: 0.02,
            cusum_alpha: 0.0,
            em_tol: 1e-8,
            em_max_iter: 500,
            em_restarts: 8,
        }
    }
}

/// Data generation settings for Burgers' cases.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BurgersDataConfig {
    pub n_x: usize,
    pub n_t: usize,
    pub n_o: usize,
}

/// Wave solver settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveDataConfig {
    pub nx: usize,
    pub nz: usize,
    pub t_end: f64,
    pub cfl_safety: f64,
    pub n_receivers: usize,
    pub snapshot_times: Vec<f64>,
    pub sponge_cells: usize,
    pub source_x: f64,
    pub source_z: f64,
    pub source_width: f64,
    pub anomaly: EllipseAnomaly,
}

/// Fully resolved settings for one run (echoed as `config.toml`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub case: String,
    pub preset: Preset,
    pub seed: u64,
    pub detection: DetectionConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burgers_data: Option<BurgersDataConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burgers_train: Option<BurgersInverseConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wave_data: Option<WaveDataConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wave_train: Option<WaveInverseConfig>,
    /// Observation sampling note carried into reports.
    pub sampling: String,
}

impl ExperimentConfig {
    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let mut resolved = if self.case.is_wave() {
            let (wave_data, wave_train) = wave_preset(self.preset, self.seed);
            ResolvedConfig {
                case: self.case.name().to_string(),
                preset: self.preset,
                seed: self.seed,
                detection: DetectionConfig::default(),
                burgers_data: None,
                burgers_train: None,
                wave_data: Some(wave_data),
                wave_train: Some(wave_train),
                sampling: "uniform_random (grid nodes, without replacement)".into(),
            }
        } else {
            let (data, train) = burgers_preset(self.preset, self.seed);
            ResolvedConfig {
                case: self.case.name().to_string(),
                preset: self.preset,
                seed: self.seed,
                detection: DetectionConfig::default(),
                burgers_data: Some(data),
                burgers_train: Some(train),
                wave_data: None,
                wave_train: None,
                sampling: "uniform_random (grid nodes, without replacement)".into(),
            }
        };
        for (key, value) in &self.overrides {
            apply_override(&mut resolved, key, value)?;
        }
        Ok(resolved)
    }
}

fn burgers_preset(preset: Preset, seed: u64) -> (BurgersDataConfig, BurgersInverseConfig) {
    match preset {
        Preset::Paper => (
            BurgersDataConfig {
                n_x: 256,
                n_t: 256,
                n_o: 4000,
            },
            BurgersInverseConfig::paper(seed),
        ),
        Preset::Desk => {
            let mut train = BurgersInverseConfig::paper(seed);
            train.n_r = 16_000;
            train.batch_r = 1_000;
            train.batch_o = 1_000;
            train.epochs = 8_000;
            train.lr_decay_every = 800;
            train.backbone = NetSpec {
                depth: 4,
                width: 64,
                gated: true,
            };
            train.subnet = NetSpec {
                depth: 3,
                width: 32,
                gated: true,
            };
            (
                BurgersDataConfig {
                    n_x: 256,
                    n_t: 256,
                    n_o: 2000,
                },
                train,
            )
        }
    }
}

fn wave_preset(preset: Preset, seed: u64) -> (WaveDataConfig, WaveInverseConfig) {
    let anomaly = EllipseAnomaly::default();
    match preset {
        Preset::Paper => (
            WaveDataConfig {
                nx: 240,
                nz: 96,
                t_end: 0.5,
                cfl_safety: 0.8,
                n_receivers: 24,
                snapshot_times: vec![0.01, 0.05],
                sponge_cells: 20,
                source_x: 0.2,
                source_z: 0.2,
                source_width: 0.05,
                anomaly,
            },
            WaveInverseConfig::paper(seed),
        ),
        Preset::Desk => {
            let mut train = WaveInverseConfig::paper(seed);
            train.mesh_nx = 64;
            train.mesh_nz = 64;
            train.n_r = 4_000;
            train.n_boundary = 500;
            train.backbone = NetSpec {
                depth: 6,
                width: 64,
                gated: false,
            };
            train.subnet = NetSpec {
                depth: 5,
                width: 10,
                gated: false,
            };
            train.stage_epochs = [1_000, 500, 4_000, 4_000];
            train.s34_decay_every = 2_500;
            train.lbfgs_epochs = 200;
            train.batch_r = 700;
            train.batch_snap = 700;
            train.batch_pc = 250;
            train.batch_obs = 700;
            (
                WaveDataConfig {
                    nx: 64,
                    nz: 64,
                    t_end: 0.5,
                    cfl_safety: 0.8,
                    n_receivers: 24,
                    snapshot_times: vec![0.01, 0.05],
                    sponge_cells: 10,
                    source_x: 0.2,
                    source_z: 0.2,
                    source_width: 0.05,
                    anomaly,
                },
                train,
            )
        }
    }
}

/// Applies one `key=value` override onto the resolved configuration.
fn apply_override(cfg: &mut ResolvedConfig, key: &str, value: &str) -> Result<()> {
    let bad = |k: &str| Error::contract(format!("unknown or inapplicable override key '{k}'"));
    let parse_f = |v: &str| -> Result<f64> {
        v.parse()
            .map_err(|_| Error::contract(format!("bad float '{v}'")))
    };
    let parse_u = |v: &str| -> Result<usize> {
        v.parse()
            .map_err(|_| Error::contract(format!("bad integer '{v}'")))
    };
    match key {
        "detect.threshold" => cfg.detection.threshold = parse_f(value)?,
        "detect.k_max" => cfg.detection.k_max = parse_u(value)?,
        "detect.cusum_alpha" => cfg.detection.cusum_alpha = parse_f(value)?,
        _ if key.starts_with("data.") => {
            let data = cfg.burgers_data.as_mut().ok_or_else(|| bad(key))?;
            match key {
                "data.n_x" => data.n_x = parse_u(value)?,
                "data.n_t" => data.n_t = parse_u(value)?,
                "data.n_o" => data.n_o = parse_u(value)?,
                _ => return Err(bad(key)),
            }
        }
        _ if key.starts_with("train.") => {
            let train = cfg.burgers_train.as_mut().ok_or_else(|| bad(key))?;
            match key {
                "train.epochs" => train.epochs = parse_u(value)?,
                "train.n_r" => train.n_r = parse_u(value)?,
                "train.batch_r" => train.batch_r = parse_u(value)?,
                "train.batch_o" => train.batch_o = parse_u(value)?,
                "train.lr0" => train.lr0 = parse_f(value)?,
                "train.lr_decay" => train.lr_decay = parse_f(value)?,
                "train.lr_decay_every" => train.lr_decay_every = parse_u(value)?,
                "train.eta" => train.eta = parse_f(value)?,
                "train.eps" => train.eps = parse_f(value)?,
                "train.backbone_depth" => train.backbone.depth = parse_u(value)?,
                "train.backbone_width" => train.backbone.width = parse_u(value)?,
                "train.subnet_depth" => train.subnet.depth = parse_u(value)?,
                "train.subnet_width" => train.subnet.width = parse_u(value)?,
                "train.log_every" => train.log_every = parse_u(value)?,
                _ => return Err(bad(key)),
            }
        }
        _ if key.starts_with("wave.") => match key {
            "wave.nx" => cfg.wave_data.as_mut().ok_or_else(|| bad(key))?.nx = parse_u(value)?,
            "wave.nz" => cfg.wave_data.as_mut().ok_or_else(|| bad(key))?.nz = parse_u(value)?,
            "wave.n_receivers" => {
                cfg.wave_data.as_mut().ok_or_else(|| bad(key))?.n_receivers = parse_u(value)?
            }
            "wave.lbfgs_epochs" => {
                cfg.wave_train.as_mut().ok_or_else(|| bad(key))?.lbfgs_epochs = parse_u(value)?
            }
            "wave.stage_epochs" => {
                let parts: Vec<usize> = value
                    .split(|c| c == ',' || c == 'x')
                    .map(|p| parse_u(p.trim()))
                    .collect::<Result<_>>()?;
                if parts.len() != 4 {
                    return Err(Error::contract("wave.stage_epochs needs four values"));
                }
                cfg.wave_train.as_mut().ok_or_else(|| bad(key))?.stage_epochs =
                    [parts[0], parts[1], parts[2], parts[3]];
            }
            "wave.n_r" => cfg.wave_train.as_mut().ok_or_else(|| bad(key))?.n_r = parse_u(value)?,
            _ => return Err(bad(key)),
        },
        _ => return Err(bad(key)),
    }
    Ok(())
}

impl ResolvedConfig {
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::format("config.toml", e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::format("config.toml", e.to_string()))
    }

    /// Short hex digest of the canonical TOML echo.
    pub fn hash(&self) -> Result<String> {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml()?.as_bytes());
        let digest = hasher.finalize();
        Ok(digest[..8].iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn grid(&self) -> Option<Grid1D> {
        self.burgers_data.as_ref().map(|d| Grid1D {
            x_min: -8.0,
            x_max: 8.0,
            n_x: d.n_x,
            t_end: 10.0,
            n_t: d.n_t,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolve_and_roundtrip_toml() {
        let cfg = ExperimentConfig {
            case: CaseId::C1_2,
            preset: Preset::Desk,
            seed: 11,
            out_dir: PathBuf::from("/tmp/x"),
            overrides: vec![("train.epochs".into(), "123".into())],
        };
        let resolved = cfg.resolve().unwrap();
        assert_eq!(resolved.burgers_train.as_ref().unwrap().epochs, 123);
        let text = resolved.to_toml().unwrap();
        let back = ResolvedConfig::from_toml(&text).unwrap();
        assert_eq!(back.burgers_train.unwrap().epochs, 123);
        assert_eq!(resolved.hash().unwrap().len(), 16);
    }

    #[test]
    fn wave_resolution_and_bad_keys() {
        let cfg = ExperimentConfig {
            case: CaseId::WaveEllipse,
            preset: Preset::Desk,
            seed: 1,
            out_dir: PathBuf::from("/tmp/x"),
            overrides: vec![("wave.stage_epochs".into(), "1,2,3,4".into())],
        };
        let resolved = cfg.resolve().unwrap();
        assert_eq!(resolved.wave_train.as_ref().unwrap().stage_epochs, [1, 2, 3, 4]);

        let cfg = ExperimentConfig {
            case: CaseId::WaveEllipse,
            preset: Preset::Desk,
            seed: 1,
            out_dir: PathBuf::from("/tmp/x"),
            overrides: vec![("data.n_o".into(), "5".into())],
        };
        assert!(cfg.resolve().is_err());
    }

    #[test]
    fn desk_preset_keeps_case_schedules_untouched() {
        // The desk preset only changes resolution and training scale;
        // schedules come from the case registry regardless of preset.
        let desk = ExperimentConfig {
            case: CaseId::C3,
            preset: Preset::Desk,
            seed: 5,
            out_dir: PathBuf::from("/tmp/x"),
            overrides: vec![],
        }
        .resolve()
        .unwrap();
        let paper = ExperimentConfig {
            case: CaseId::C3,
            preset: Preset::Paper,
            seed: 5,
            out_dir: PathBuf::from("/tmp/x"),
            overrides: vec![],
        }
        .resolve()
        .unwrap();
        assert_eq!(desk.case, paper.case);
        let c = super::super::cases::burgers_case(CaseId::C3).unwrap();
        assert_eq!(c.lam1.eval(3.0), 0.75);
    }
}
