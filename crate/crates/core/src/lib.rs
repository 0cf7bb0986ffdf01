// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dist;
pub mod error;
pub mod likelihood;
pub mod mcmc;
pub mod model;
pub mod pricing;
pub mod rng;
pub mod seasonality;
pub mod series;

pub use error::{Error, Result};
