use alloc::boxed::Box;
use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("index {index} out of range for {what} of size {size}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },

    #[error("invalid weights: {0}")]
    InvalidWeights(&'static str),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("agent {agent}: zero probability mass at step {step}")]
    ZeroMass { agent: usize, step: usize },

    #[error("{what} did not converge after {sweeps} sweeps (residual {residual:e})")]
    NotConverged {
        what: &'static str,
        sweeps: usize,
        residual: f64,
    },

    #[error("inconsistent input: {0}")]
    Inconsistent(String),

    #[error("map parse error on line {line}: {reason}")]
    Map { line: usize, reason: String },

    #[error("episode with seed {seed}: {source}")]
    Episode { seed: u64, source: Box<Error> },
}

impl Error {
    /// True for failures of a numerical procedure (non-convergence, zero mass)
    /// as opposed to invalid input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::ZeroMass { .. } | Error::NotConverged { .. } => true,
            Error::Episode { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
