// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod extraction;
pub mod geometry;
pub mod layering;
pub mod metrics;
pub mod pipeline;
pub mod rasterview;
pub mod skinning;
pub mod synthgen;
pub mod udfnet;

pub use error::{Error, Result};
