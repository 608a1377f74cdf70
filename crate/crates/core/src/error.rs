use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::gmm::GmmModel;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("covariance matrix is not symmetric positive definite")]
    SingularCovariance,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("mixture component {0} degenerated")]
    DegenerateComponent(usize),

    #[error("pooled variance undefined for n = {n} samples and k = {k} clusters")]
    DegenerateVariance { n: usize, k: usize },

    #[error("argument out of domain: {0}")]
    Domain(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("overlap calibration failed; best average overlap reached {best}")]
    CalibrationFailed { best: f64 },

    #[error("PG-means could not fit {k} components (singular covariances in every restart)")]
    PgMeansFailed { k: usize, last_good: Box<GmmModel> },

    #[error("all {runs} runs failed; last error: {last}")]
    AllRunsFailed { runs: usize, last: Box<Error> },

    #[error("group lasso did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize, last: Vec<f64> },
}
