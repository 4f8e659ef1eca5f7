// `!(x > 0.0)` also rejects NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod elastic;
pub mod error;
pub mod evaluate;
pub mod functional;
pub mod ingest;
pub mod karcher;
pub mod stats;
pub mod synthesis;
pub mod toy;
pub mod tuning;

pub use error::{Error, Result};
