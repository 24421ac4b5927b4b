use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the simulation, inversion and experiment layers.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid driver: {0}")]
    InvalidDriver(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point {re}+{im}i is not in the open upper half-plane")]
    OutsideHalfPlane { re: f64, im: f64 },

    #[error("time {t} is not on the chain grid (step {dt})")]
    OffGrid { t: f64, dt: f64 },

    #[error("slit-map orbit left the upper half-plane at step {step}")]
    Singularity { step: usize },

    #[error("zipper failed at step {step}: point mapped to Im <= 0 (non-simple input?)")]
    ZipperFailure { step: usize },

    #[error("mismatched grids: {0}")]
    GridMismatch(String),

    #[error("mollification could not reach energy gap {target} (best {best})")]
    MollifyFailed { target: f64, best: f64 },

    #[error("{indeterminate} of {replicas} replicas hit a solver singularity (budget 0.1%)")]
    SingularityBudget { indeterminate: usize, replicas: usize },

    #[error("optimizer could not satisfy the constraint (residual {residual})")]
    Infeasible { residual: f64 },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl LabError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
