// `!(x > y)` is used on purpose so that NaN lands in the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod edge;
pub mod eig;
pub mod error;
pub mod matrix;
pub mod pa;
pub mod sampling;
pub mod stats;
pub mod tw;

pub use error::{Error, Result};
