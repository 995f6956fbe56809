use num_complex::Complex64;
use thiserror::Error;

/// Errors produced by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{function}: argument {value} is outside the domain ({reason})")]
    Domain {
        function: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("point {re}{im:+}i lies on the slit (-inf, 0]")]
    OnSlit { re: f64, im: f64 },

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("series did not converge within {terms} terms (partial sum {partial})")]
    Convergence { partial: Complex64, terms: usize },

    #[error("states live in different spaces (q = {left} vs q = {right})")]
    IncompatibleSpace { left: f64, right: f64 },

    #[error("inner-product term overflows double precision at index {index}")]
    Overflow { index: usize },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_order(q: f64) -> Result<()> {
    if q.is_finite() && q > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "q",
            value: q,
            reason: "order must be finite and positive",
        })
    }
}
