//! Treebolic space `HT(q, p)`: geometry, isometries, closed-form laws of the
//! Brownian motion and Monte Carlo simulators for it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acceptance;
pub mod analysis;
pub mod closed_forms;
pub mod error;
pub mod hyperbolic;
pub mod isometry;
pub mod padic;
pub mod path;
pub mod skeleton;
pub mod tree;
pub mod treebolic;
pub mod vertical;

pub use error::{Error, Result};
