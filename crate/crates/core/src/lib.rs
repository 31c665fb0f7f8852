// `!(x > 0.0)` is used deliberately so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod equilibrium;
pub mod error;
pub mod fracmoments;
pub mod mittag;
pub mod models;
pub mod montecarlo;
pub mod polybasis;
pub mod quadrature;
pub mod statedep;

pub use error::{Error, Result};
