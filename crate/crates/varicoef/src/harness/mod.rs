//! Experiment orchestration: case registry, configuration presets,
//! end-to-end runs, verification, and static plot emission.

mod cases;
mod config;
mod plots;
mod run;
mod svg;
mod verify;

pub use cases::{burgers_case, BurgersCase, CaseId, EllipseAnomaly};
pub use config::{
    BurgersDataConfig, DetectionConfig, ExperimentConfig, Preset, ResolvedConfig, WaveDataConfig,
};
pub use plots::make_plots;
pub use run::{
    analyze_series, classify_alpha, classify_alpha_coordinates, detect_existing, read_loss_csv,
    read_pair_checkpoint, run_case, run_case_upto, write_pair_checkpoint, RunArtifacts, RunPhase,
    RunSummary, SeriesAnalysis, WaveSummary,
};
pub use verify::{verify, CaseExpectations, Expectations, VerifyOutcome, VerifyRow};
