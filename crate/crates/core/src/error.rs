use thiserror::Error;

/// Failures raised anywhere in the library.
///
/// Variants fall into two families: malformed or infeasible input
/// ([`ErrorKind::Input`]) and numeric procedures that did not reach their
/// tolerance ([`ErrorKind::Numeric`]). Front ends map the family to an exit code.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("step set is empty")]
    EmptySteps,
    #[error("negative weight {weight} on step ({dx}, {dy})")]
    NegativeWeight { dx: i64, dy: i64, weight: f64 },
    #[error("non-finite weight on step ({dx}, {dy})")]
    NonFiniteWeight { dx: i64, dy: i64 },
    #[error("total step weight is zero")]
    ZeroTotalWeight,
    #[error("coordinate {axis} takes a single value; the walk is degenerate along it")]
    DegenerateCoordinate { axis: usize },
    #[error("step support is degenerate (singular covariance)")]
    DegenerateSupport,
    #[error("target drift ({0}, {1}) is not in the interior of the step hull")]
    InfeasibleDrift(f64, f64),
    #[error("vertical drift {0} is not zero")]
    NonZeroVerticalDrift(f64),
    #[error("horizontal drift {0} is not positive")]
    NonPositiveHorizontalDrift(f64),
    #[error("ladder height distribution has zero mean")]
    ZeroLadderMean,
    #[error("no boundary convention makes the renewal function harmonic (residuals {0:e}, {1:e})")]
    NoConvention(f64, f64),
    #[error("both boundary conventions make the renewal function harmonic")]
    AmbiguousConvention,
    #[error("start point ({0}, {1}) is outside the survival region")]
    StartOutside(i64, i64),
    #[error("barrier {barrier} is smaller than the largest horizontal jump {max_dx}")]
    BarrierTooSmall { barrier: i64, max_dx: i64 },
    #[error("no finite barrier exists: {0}")]
    InfeasibleBarrier(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("{what} did not converge: residual {residual:e} after {iterations} iterations")]
    NotConverged {
        what: &'static str,
        residual: f64,
        iterations: usize,
    },
    #[error("requested band {requested:e} not reached; achieved {achieved:e}")]
    BandNotReached { requested: f64, achieved: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NotConverged { .. } | Error::BandNotReached { .. } => ErrorKind::Numeric,
            _ => ErrorKind::Input,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
