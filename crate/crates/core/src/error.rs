use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid oscillator index {index} (space has {factors} factor(s))")]
    InvalidOscillator { index: usize, factors: usize },

    #[error("invalid Fock truncation: {0}")]
    InvalidSpace(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("total dimension {total} exceeds configured maximum {max}")]
    DimensionOverflow { total: usize, max: usize },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("state has zero norm")]
    ZeroNorm,

    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),

    #[error("Liouvillian null space is degenerate (second singular value {second:e} <= threshold {threshold:e})")]
    DegenerateNullSpace { second: f64, threshold: f64 },

    #[error("negative evolution time {0}")]
    NegativeTime(f64),

    #[error("norm collapse at step {step}: pre-normalization norm {norm:e}")]
    NormCollapse { step: u64, norm: f64 },

    #[error("top Fock level population {population:e} exceeds leak tolerance {tolerance:e} at t = {time}")]
    TruncationLeak {
        time: f64,
        population: f64,
        tolerance: f64,
    },

    #[error("time step too large: total jump probability {0} per step exceeds 0.1")]
    StepTooLarge(f64),

    #[error("undefined indicator: {0}")]
    Undefined(&'static str),

    #[error("insufficient samples: need {needed}, have {have}")]
    InsufficientSamples { needed: usize, have: usize },

    #[error("{failed} of {total} trajectories failed (budget 1%); first failure: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by user input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::InvalidParameter { .. }
                | Error::InvalidSpace(_)
                | Error::InvalidOscillator { .. }
                | Error::DimensionOverflow { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
