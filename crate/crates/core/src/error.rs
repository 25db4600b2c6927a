use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("probability {0} outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    /// `1 - F(z)` vanished: the point sits at or beyond the right edge of
    /// the support, where the hazard rate is undefined.
    #[error("survival function vanishes at z = {z} (support edge)")]
    SupportEdge { z: f64 },

    #[error("no tail envelope registered for distribution `{0}`")]
    NoEnvelope(&'static str),

    #[error("distribution `{kind}` has no finite mean")]
    InfiniteMean { kind: &'static str },

    #[error("quadrature did not converge: estimate {estimate}, error {error_estimate} after {intervals} intervals")]
    QuadratureNotConverged {
        estimate: f64,
        error_estimate: f64,
        intervals: usize,
    },

    #[error("gain {value} at round {round}, arm {arm} is outside [-1, 0]")]
    InvalidGain { round: u64, arm: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("{0}")]
    Numerical(String),

    #[error("{0}")]
    Unsupported(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
