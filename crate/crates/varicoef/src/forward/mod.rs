//! Forward data generation: solvers and analytic references.

mod burgers;
mod field;
mod observe;
mod schedule;
mod wave;

pub use burgers::{
    heat_reference, initial_condition, solve_burgers, solve_burgers_opts, BurgersOptions, Grid1D,
};
pub use field::{AxisMeta, Field};
pub use observe::{sample_observations, ObservationSet};
pub use schedule::{PiecewiseSchedule, Segment};
pub use wave::{
    gradient, solve_wave, GaussianPulse, Snapshot, SourceKind, WaveMedium, WaveRun,
    WaveRunConfig,
};
