//! Recomputes logged estimator values from stored step artifacts.

use std::path::Path;

use super::config::RunConfig;
use super::output::{read_artifact, read_log, Action, LogRow};
use super::run::{step_report, Discretization};
use crate::error::Result;

/// The estimator part of the row of `step`, from its artifact.
pub fn estimate_step(cfg: &RunConfig, dir: &Path, step: usize) -> Result<LogRow> {
    let (mesh, history) = read_artifact(dir, step)?;
    let d = Discretization::new(mesh, &cfg.physics)?;
    let report = step_report(cfg, &d, &history)?;
    Ok(LogRow::from_report(&report, history.level(0)))
}

/// Outcome of replaying a run directory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Replay {
    pub checked: usize,
    /// Steps whose recomputed estimates differ from the log.
    pub mismatched: Vec<usize>,
    pub rows: Vec<LogRow>,
}

/// Recomputes every step with an artifact and compares with `log.csv`.
pub fn estimate_from_artifacts(cfg: &RunConfig, dir: &Path) -> Result<Replay> {
    let log = read_log(&dir.join("log.csv"))?;
    let mut out = Replay::default();
    for row in log.iter().filter(|r| r.action != Action::Restart) {
        let stem = super::output::artifact_stem(dir, row.step);
        if !stem.with_extension("levels").exists() {
            continue;
        }
        let again = estimate_step(cfg, dir, row.step)?;
        out.checked += 1;
        if !again.same_estimates(row) {
            out.mismatched.push(row.step);
        }
        out.rows.push(again);
    }
    Ok(out)
}
