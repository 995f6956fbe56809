// Negated comparisons are deliberate: they treat NaN as a failure.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod operators;
pub mod space;
pub mod specfun;
pub mod summation;
pub mod thermal;

pub use error::{Error, Result};
