use std::fmt;

use thiserror::Error;

/// A single field-level validation failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// All field diagnostics collected while validating a configuration.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub errors: Vec<FieldError>,
}

impl ValidationReport {
    pub fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.errors.push(FieldError::new(field, message));
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.errors.extend(other.errors);
    }

    /// Returns `Ok(())` when no diagnostics were recorded.
    pub fn into_result(self) -> Result<(), ValidationReport> {
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(self)
        }
    }

    pub fn mentions(&self, needle: &str) -> bool {
        self.errors
            .iter()
            .any(|e| e.message.contains(needle) || e.field.contains(needle))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.errors.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationReport {}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration:\n{0}")]
    Invalid(#[from] ValidationReport),

    #[error("invalid argument `{name}`: {reason}")]
    Domain { name: &'static str, reason: String },

    #[error("no sign change on [{lo:e}, {hi:e}] while solving for {what}")]
    NoSignChange { what: &'static str, lo: f64, hi: f64 },

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("quadrature on [{lo}, {hi}] exhausted its refinement budget")]
    Quadrature { lo: f64, hi: f64 },

    #[error("wealth {wealth:e} is below the zero-wealth threshold; the risky fraction is undefined")]
    ZeroWealth { wealth: f64 },

    #[error("priors are not equivalent: {0}")]
    SupportMismatch(String),

    #[error("penalty overflow: log-magnitude {0} is not representable")]
    PenaltyOverflow(f64),

    #[error("every candidate prior failed to evaluate")]
    AllEvaluationsFailed,

    #[error("config parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
