use std::fmt;

/// Errors raised across the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("static channel has no distance distribution (t and d_tr must be positive)")]
    StaticChannel,

    #[error("quadrature did not converge: estimate {estimate:e}, error estimate {error:e} after {evaluations} evaluations")]
    Quadrature {
        estimate: f64,
        error: f64,
        evaluations: usize,
    },

    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),

    #[error("constellation is not channel-free: {0}")]
    NotChannelFree(crate::constellation::Witness),

    #[error("impossible observation: every symbol has zero likelihood")]
    ImpossibleObservation,

    #[error("enumeration support of {cells} cells exceeds the limit of {limit}; use Monte Carlo instead")]
    SupportTooLarge { cells: u128, limit: u128 },

    #[error("infeasible scenario: {0}")]
    Infeasible(String),

    #[error("{0}")]
    Config(ConfigError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A configuration problem, optionally pinned to a line of the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Config(ConfigError {
            line,
            message: message.into(),
        })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
