use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its admissible domain.
    InvalidArgument(String),
    /// Two objects that must agree on a dimension do not.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// An iterative method ran out of iterations.
    NotConverged {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    /// A matrix that must be positive definite is not.
    NotPositiveDefinite(&'static str),
    /// Random generation could not produce a valid sample.
    Generation(String),
    /// Fewer candidate pairs than requested.
    InsufficientPairs { requested: usize, available: usize },
    /// The training objective became NaN or infinite.
    NonFiniteLoss { phase: &'static str, iteration: usize },
    /// Every multistart restart failed; carries the last failure.
    AllRestartsFailed { restarts: usize, last: String },
    /// The closed-loop simulation could not compute an input.
    ClosedLoop { step: usize, reason: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::DimensionMismatch {
                what,
                expected,
                found,
            } => write!(
                f,
                "dimension mismatch for {what}: expected {expected}, found {found}"
            ),
            Error::NotConverged {
                what,
                iterations,
                residual,
            } => write!(
                f,
                "{what} did not converge after {iterations} iterations (residual {residual:e})"
            ),
            Error::NotPositiveDefinite(what) => write!(f, "{what} is not positive definite"),
            Error::Generation(msg) => write!(f, "generation failed: {msg}"),
            Error::InsufficientPairs {
                requested,
                available,
            } => write!(
                f,
                "requested {requested} pairs but only {available} are available"
            ),
            Error::NonFiniteLoss { phase, iteration } => {
                write!(f, "non-finite loss in {phase} at iteration {iteration}")
            }
            Error::AllRestartsFailed { restarts, last } => {
                write!(f, "all {restarts} restarts failed; last error: {last}")
            }
            Error::ClosedLoop { step, reason } => {
                write!(f, "closed loop aborted at step {step}: {reason}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}
