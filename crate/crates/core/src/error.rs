use thiserror::Error;

/// Errors raised by the approximation toolkit.
///
/// Diagnostic verdicts (a failed growth check, a divergent growth norm) are
/// reported as data, not through this type.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The maximiser of a conjugate may lie beyond the sampled range.
    #[error("truncation certificate failed: end slope {slope:.6e} < required {required:.6e}")]
    Truncation { slope: f64, required: f64 },

    #[error("point {point} outside sampled range [{lo}, {hi}]")]
    Range { point: f64, lo: f64, hi: f64 },

    #[error("exp({exponent}) overflows; use the log-space evaluator")]
    Overflow { exponent: f64 },

    #[error("derivative order {requested} exceeds supported order {max}")]
    Order { requested: usize, max: usize },

    #[error("tail certificate unavailable: {0}")]
    Certificate(String),

    #[error("quadrature resolution: panel width {width:.3e} exceeds {limit:.3e}")]
    Resolution { width: f64, limit: f64 },

    /// A series failed its convergence probe.
    #[error("divergence: {0}")]
    Divergence(String),

    #[error("budget exhausted: {0}")]
    Budget(String),

    #[error("config: {0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
