//! Error type shared by the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter chain violated: {0}")]
    ChainViolation(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("equilibrium solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("equilibrium surface pinched off (min height {min_height:e})")]
    PinchOff { min_height: f64 },
    #[error("degenerate flattening map (min J = {min_j:e})")]
    DegenerateMap { min_j: f64 },
    #[error("eigensolver failure: {0}")]
    EigensolveFailure(String),
    #[error("requested {requested} basis fields but the discrete space has dimension {available}")]
    SubspaceTooSmall { requested: usize, available: usize },
    #[error("singular step matrix (pivot ratio {pivot_ratio:e})")]
    SingularStepMatrix { pivot_ratio: f64 },
    #[error("history gap: {0}")]
    HistoryGap(String),
    #[error("pressure solve failed: {0}")]
    SaddlePointSolveFailure(String),
    #[error("incompatible initial data: {0}")]
    CompatibilityFailure(String),
    #[error("initial data too large: norm {norm:e} exceeds delta {delta:e}")]
    SmallnessViolation { norm: f64, delta: f64 },
    #[error("fixed-point iteration not contracting (ratios {ratios:?})")]
    NotContracting { ratios: Vec<f64> },
    #[error("fixed-point iteration hit max_iter = {iterations} (last distance {distance:e})")]
    MaxIterExceeded { iterations: usize, distance: f64 },
    #[error("degenerate energy series: {0}")]
    DegenerateSeries(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        !matches!(
            self,
            Error::ChainViolation(_)
                | Error::IndexOutOfRange(_)
                | Error::Config(_)
                | Error::CompatibilityFailure(_)
                | Error::SmallnessViolation { .. }
                | Error::Io(_)
                | Error::Checkpoint(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
