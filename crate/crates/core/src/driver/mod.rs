//! Scenarios, configuration, the adaptive loop, run output, estimator
//! replay from artifacts and the reference comparison.

pub mod compare;
pub mod config;
pub mod estimate;
pub mod output;
pub mod run;

pub use compare::{compare_artifacts, compare_reference, Comparison, CoarseEstimates, ErrorAccumulator, Trajectory, TrajectoryRecorder};
pub use config::{Initial, Physics, RunConfig, Scale, Scenario};
pub use estimate::{estimate_from_artifacts, estimate_step, Replay};
pub use output::{read_artifact, read_log, write_artifact, Action, LogRow, RunSummary};
pub use run::{adapt_once, run, run_monodomain_adaptive, run_scalar_adaptive, NoObserver, Observer, RunOutput, StepView};
