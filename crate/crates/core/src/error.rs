use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed `kind(name=value,...)` specification.
    #[error("parse error at `{token}`: {message}")]
    Parse { token: String, message: String },

    #[error("configuration error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("simulation diverged on path {path_index} at step {step}")]
    Diverged { path_index: u64, step: usize },

    #[error("degenerate step {step}: mean K over the cell is zero")]
    DegenerateStep { step: usize },

    #[error("degenerate ratio on window [{t_index}, {horizon_index}]: functional is zero")]
    DegenerateRatio {
        t_index: usize,
        horizon_index: usize,
    },

    #[error("singular ratio: q vanishes at grid index {index}")]
    SingularRatio { index: usize },

    #[error("K vanishes at x = {x}")]
    Singularity { x: f64 },

    #[error("underflow: {0}")]
    Underflow(String),

    #[error("quadrature budget of {evaluations} evaluations exceeded (best estimate {best_estimate}, error {error_estimate})")]
    BudgetExceeded {
        evaluations: usize,
        best_estimate: f64,
        error_estimate: f64,
    },

    #[error("assumptions violated: {0}")]
    AssumptionViolation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(token: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            token: token.into(),
            message: message.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Process exit code for the CLI: 2 configuration, 3 numerical failure,
    /// 4 assumption violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Config { .. } | Error::Io(_) | Error::Csv(_) => 2,
            Error::AssumptionViolation(_) => 4,
            Error::Diverged { .. }
            | Error::DegenerateStep { .. }
            | Error::DegenerateRatio { .. }
            | Error::SingularRatio { .. }
            | Error::Singularity { .. }
            | Error::Underflow(_)
            | Error::BudgetExceeded { .. } => 3,
        }
    }
}
