#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod descent;
pub mod error;
pub mod field;
pub mod hj;
pub mod oracle;
pub mod props;

pub use error::{Error, Result};
