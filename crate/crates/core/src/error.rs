use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A gradient, bracket or state component evaluated to NaN or infinity.
    #[error("non-finite value in {what}")]
    NumericalDomain { what: String },

    /// Newton iteration for the Legendre transform did not converge.
    #[error("Legendre transform did not converge at x={x:?}, v={v:?} (fiberwise convexity violated?)")]
    ConvexityViolation { x: Vec<f64>, v: Vec<f64> },

    #[error("implicit step {step} failed: Newton did not converge (residual {residual:e})")]
    StepFailure { step: usize, residual: f64 },

    #[error("state blew up at step {step}")]
    BlowUp { step: usize },

    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },

    /// The Aubry estimate does not cover every node, so graph probes are undefined.
    #[error("graph-not-full: Aubry estimate covers {covered} of {total} nodes")]
    GraphNotFull { covered: usize, total: usize },

    /// The Legendre-Fenchel supremum sits on the edge of the cohomology grid.
    #[error("supremum for h={h:?} attained on the boundary of the c-grid; widen the grid")]
    WidenGrid { h: Vec<f64> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn domain(what: impl Into<String>) -> Self {
        Error::NumericalDomain { what: what.into() }
    }

    /// True for configuration errors (including a c-grid too narrow for β), false for
    /// numerical failures.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::Dimension { .. } | Error::WidenGrid { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
