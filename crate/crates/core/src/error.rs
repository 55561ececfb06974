use std::fmt;

use crate::model::ValidationReport;

/// Errors raised by the numerical core.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("grid functions live on different domains")]
    DomainMismatch,

    #[error("non-finite value at node {index}")]
    NonFinite { index: usize },

    #[error("operation requires a periodic domain")]
    NotPeriodic,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("hypothesis check failed:\n{0}")]
    Validation(ValidationReport),

    #[error("state is identically zero")]
    ZeroState,

    #[error("fibering bracket failure: no sign change of the fibering slope within 2^60 scaling")]
    FiberingBracket,

    #[error("fibering projection did not reach a maximum (phi(t*) = {value}, bracket max = {bracket_max})")]
    FiberingNotMaximum { value: f64, bracket_max: f64 },

    #[error("conjugate gradients did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    CgDivergence { iterations: usize, residual: f64 },

    #[error("solver stalled: {0}")]
    Stalled(StallDiagnostics),

    #[error("all starts failed:\n{}", format_starts(.0))]
    AllStartsFailed(Vec<StallDiagnostics>),

    #[error("{0}")]
    Diagnostic(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Why a descent run stopped without meeting its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct StallDiagnostics {
    pub start_index: usize,
    pub iterations: usize,
    pub energy: f64,
    pub grad_residual: f64,
    pub reason: String,
}

impl fmt::Display for StallDiagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "start {}: {} after {} iterations (energy {:.12e}, residual {:.3e})",
            self.start_index, self.reason, self.iterations, self.energy, self.grad_residual
        )
    }
}

fn format_starts(starts: &[StallDiagnostics]) -> String {
    starts
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

pub type Result<T> = std::result::Result<T, Error>;
