use thiserror::Error;

pub type RomResult<T> = Result<T, RomError>;

#[derive(Debug, Error)]
pub enum RomError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Newton did not reach the residual tolerance. `step` is the index of
    /// the time step being solved (1-based, the initial state is step 0).
    #[error(
        "Newton failed at step {step} after {iterations} iterations (residual norm {residual:e})"
    )]
    SolverFailure {
        step: usize,
        iterations: usize,
        residual: f64,
        iterate: Vec<f64>,
    },

    #[error("requested {requested} modes but the snapshot set has numerical rank {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("energy fractions undefined: all eigenvalues are zero")]
    UndefinedEnergy,

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl RomError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        RomError::InvalidArgument(msg.into())
    }
}

/// Fails with `InvalidArgument` unless `actual == expected`.
pub(crate) fn check_dim(what: &str, actual: usize, expected: usize) -> RomResult<()> {
    if actual == expected {
        Ok(())
    } else {
        Err(RomError::invalid(format!(
            "{what}: dimension {actual} does not match expected {expected}"
        )))
    }
}
