use std::path::PathBuf;

use thiserror::Error;

/// Error type shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("topology error at edge ({0}, {1}): {2}")]
    Topology(usize, usize, String),

    #[error("point ({0}, {1}) lies outside the domain")]
    OutOfDomain(f64, f64),

    #[error("degenerate element {index}: signed area {area:e}")]
    DegenerateElement { index: usize, area: f64 },

    #[error("metric is not symmetric positive definite: [{0:e}, {1:e}; {1:e}, {2:e}]")]
    InvalidMetric(f64, f64, f64),

    #[error("diffusion coefficient {value:e} is not positive at ({x}, {y})")]
    InvalidCoefficient { value: f64, x: f64, y: f64 },

    #[error("non-finite value {value} at vertex {vertex}")]
    Evaluation { vertex: usize, value: f64 },

    #[error("solution transfer failed for vertex {vertex}: {reason}")]
    Transfer { vertex: usize, reason: String },

    #[error("field is stale: built for mesh generation {field}, mesh is at {mesh}")]
    Stale { field: u64, mesh: u64 },

    #[error("insufficient history: need {needed} levels, have {available}")]
    History { needed: usize, available: usize },

    #[error("time {t} outside the reconstruction interval [{start}, {end}]")]
    Range { t: f64, start: f64, end: f64 },

    #[error("Newton iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("linear solver failed: {0}")]
    LinearSolver(String),

    #[error("remeshing failed: {0}")]
    Remesh(String),

    #[error("mesh adaptation stagnated at step {step}: relative estimator {relative:e} after {attempts} remeshes")]
    Stagnation { step: usize, relative: f64, attempts: usize },

    #[error("run restarted {0} times without passing step 3")]
    RestartLimit(usize),

    #[error("undefined effectivity index: reference error is {0:e}")]
    UndefinedIndex(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("time grids are not aligned: {0}")]
    Alignment(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error in {path}: line {line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("solver failure at step {step} (t = {t}): {source}")]
    Step {
        step: usize,
        t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short category name used by the command line front end.
    pub fn category(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Topology(..) => "topology",
            Error::OutOfDomain(..) => "out-of-domain",
            Error::DegenerateElement { .. } => "degenerate-element",
            Error::InvalidMetric(..) => "invalid-metric",
            Error::InvalidCoefficient { .. } => "invalid-coefficient",
            Error::Evaluation { .. } => "evaluation",
            Error::Transfer { .. } => "transfer",
            Error::Stale { .. } => "stale",
            Error::History { .. } => "history",
            Error::Range { .. } => "range",
            Error::NewtonDivergence { .. } => "step-failure",
            Error::LinearSolver(_) => "solver",
            Error::Remesh(_) => "remesh",
            Error::Stagnation { .. } => "stagnation",
            Error::RestartLimit(_) => "restart-limit",
            Error::UndefinedIndex(_) => "undefined-index",
            Error::Unsupported(_) => "unsupported",
            Error::Alignment(_) => "alignment",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Step { source, .. } => source.category(),
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
