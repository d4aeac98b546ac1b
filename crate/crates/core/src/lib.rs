//! Numerical verification lab for the quantum `ax+b` group.

// `!(x <= y)` is used on purpose so that NaN residuals fail.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod error;
pub mod funcspace;
pub mod group;
pub mod report;
pub mod semiclassic;
pub mod suites;
pub mod twist;

pub use error::{Error, Result};
