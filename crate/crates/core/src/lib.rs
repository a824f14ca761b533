//! Nonparametric recovery of the Lévy density of the integrator of an infinitely divisible
//! moving-average random field on a lattice.

// `!(x > 0.0)` guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod ecf;
pub mod error;
pub mod invert;
pub mod model;
pub mod numcore;
pub mod onb;
pub mod simulate;
pub mod smooth;

pub use error::{Error, Result};
