use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied parameter violates its documented range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// A query point lies outside the domain of the operation.
    #[error("point ({x}, {y}) is outside the domain: {reason}")]
    OutsideDomain { x: f64, y: f64, reason: String },

    /// A non-finite coordinate or value was supplied.
    #[error("non-finite input in `{0}`")]
    NonFinite(&'static str),

    /// An iterative solver did not reach its tolerance.
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Too many Monte-Carlo walks hit the step cap.
    #[error("{failed} of {trials} walks exceeded max_steps; shrink the shell or raise the cap")]
    WalkBudgetExceeded { failed: usize, trials: usize },

    /// A recursion or table left the range where it is numerically valid.
    #[error("sequence left the validated range at index {index}: {reason}")]
    SequenceRange { index: usize, reason: String },

    /// A query fell outside the precomputed table.
    #[error("value {value:e} is beyond the table (last breakpoint {last:e}); extend the sequence")]
    BeyondTable { value: f64, last: f64 },

    /// A sample that should be strictly negative (or positive) was not.
    #[error("sample {index} has the wrong sign: {value:e} ({reason})")]
    SignViolation {
        index: usize,
        value: f64,
        reason: &'static str,
    },

    /// A grid problem exceeds the configured size budget.
    #[error("grid of {unknowns} unknowns exceeds the budget of {budget}")]
    GridTooLarge { unknowns: usize, budget: usize },

    /// A value is too small for `f64`; use the log-space variant.
    #[error("value underflows f64 (natural log {log_value:e})")]
    Underflow { log_value: f64 },

    /// A numerical check reported by an operation failed.
    #[error("check `{check}` failed: {detail}")]
    CheckFailed { check: &'static str, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn ensure_finite(name: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name))
    }
}
