use std::path::PathBuf;

/// Errors produced by identification, tuning, benchmarking and file IO.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("length mismatch in `{field}`: expected {expected}, found {found}")]
    LengthMismatch {
        field: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in `{field}` at index {index}")]
    NonFinite { field: &'static str, index: usize },

    #[error("dataset too short: N = {n} but model order {n_x} needs at least {}", n_x + 2)]
    TooShort { n: usize, n_x: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("characteristic polynomial has roots on or outside the unit circle")]
    UnstablePolynomial,

    #[error("cutoff {omega_c} rad/s outside (0, {nyquist}) rad/s")]
    CutoffOutOfRange { omega_c: f64, nyquist: f64 },

    #[error("dual system is numerically singular (condition estimate {condition:e})")]
    SingularSystem { condition: f64 },

    #[error("simulation diverged at sample {step}")]
    DivergedSimulation { step: usize },

    #[error("reference output has zero variance")]
    ZeroVariance,

    #[error("every curiosity point diverged during tuning")]
    AllDiverged,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }
}
