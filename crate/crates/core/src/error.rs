use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the simulator and the analysis layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("rate model `{name}` is not gradient: best linear fit leaves residual {residual:e}")]
    NotGradient { name: String, residual: f64 },

    #[error("rate model `{name}` violates {check}: residual {residual:e}")]
    HypothesisViolated {
        name: String,
        check: &'static str,
        residual: f64,
    },

    #[error("rate table bounds violated: c={value} outside [{min}, {max}] for local pattern {pattern:#b}")]
    BoundsViolated {
        value: f64,
        min: f64,
        max: f64,
        pattern: usize,
    },

    #[error("local window of {sites} sites needs 2^{sites} states, above the enumeration cap of {cap}")]
    WindowTooLarge { sites: usize, cap: usize },

    #[error("system of {len} sites is too large for full generator enumeration (max {max})")]
    SystemTooLarge { len: usize, max: usize },

    #[error("test function support does not fit the torus: {0}; enlarge the torus multiplier or shorten the horizon")]
    SupportViolation(String),

    #[error("bond {0} is not tracked by this current tally")]
    UntrackedBond(usize),

    #[error("moving frame wrapped the torus ({sites} sites moved on a torus of {len}); enlarge the torus")]
    FrameWrapped { sites: i64, len: usize },

    #[error("sampling grids do not match: {0}")]
    GridMismatch(String),

    #[error("time {requested} is earlier than the current engine time {current}")]
    TimeReversal { requested: f64, current: f64 },

    #[error("CFL condition violated: dt={dt:e} exceeds limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("non-finite value in PDE solution at step {step}")]
    NonFinite { step: usize },

    #[error("fluctuation experiments need 0 < rho < 1, got {0}")]
    DegenerateDensity(f64),

    #[error("run directory {0} has no complete manifest")]
    IncompleteRun(PathBuf),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
