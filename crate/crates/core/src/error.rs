use thiserror::Error;

use crate::solvers::SolveReport;

pub type Result<T> = std::result::Result<T, CouplingError>;

#[derive(Debug, Error)]
pub enum CouplingError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular interior block in subdomain {subdomain}")]
    SingularInterior { subdomain: String },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("iteration diverged at step {} (residual {:.3e})", .report.history.len().saturating_sub(1), .report.last_residual_norm())]
    Divergence { report: Box<SolveReport> },

    #[error("Aitken update stagnated: consecutive residuals are identical but non-zero")]
    Stagnation,

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("livelock: {0}")]
    Livelock(String),

    #[error("window integrity violated: {0}")]
    Window(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CouplingError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        CouplingError::InvalidArgument(msg.into())
    }
}
