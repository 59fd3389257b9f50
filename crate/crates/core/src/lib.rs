// NaN-rejecting checks are written as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod depthproc;
pub mod error;
pub mod geometry;
pub mod hypercube;
pub mod par;
pub mod pipeline;
pub mod syntheval;
pub mod synthscene;
pub mod wire;

pub use error::{Error, Result};
