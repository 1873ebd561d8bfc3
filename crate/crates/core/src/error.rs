use thiserror::Error;

use crate::trajectory::PathRole;

/// Broad class of a failure, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad input or configuration.
    Config,
    /// The physics went somewhere the model cannot follow (particle escape).
    Physics,
    /// A numerical quality gate tripped (conditioning, grid contamination).
    Numerical,
    /// Filesystem or encoding failure.
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("expected a {expected:?} path, got a {found:?} path")]
    RoleMismatch { expected: PathRole, found: PathRole },

    #[error("path has an unflagged discontinuity: {0}")]
    UnflaggedDiscontinuity(String),

    #[error("linear system is ill-conditioned (condition number {condition:.3e}); {advice}")]
    IllConditioned { condition: f64, advice: String },

    #[error("particle escaped the trap at t = {time:.6}: {detail}")]
    Escape { time: f64, detail: String },

    #[error("escape rate {rate:.4} reached the 1% abort threshold; {advice}")]
    EscapeRate { rate: f64, advice: String },

    #[error("wavefunction reached the grid boundary at t = {time:.6} (density {density:.3e})")]
    BoundaryContamination { time: f64, density: f64 },

    #[error("numerical quality check failed: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::InvalidInput(_) | Error::RoleMismatch { .. } | Error::UnflaggedDiscontinuity(_) => {
                ErrorCategory::Config
            }
            Error::Escape { .. } | Error::EscapeRate { .. } => ErrorCategory::Physics,
            Error::IllConditioned { .. } | Error::BoundaryContamination { .. } | Error::Numerical(_) => {
                ErrorCategory::Numerical
            }
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => ErrorCategory::Io,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
