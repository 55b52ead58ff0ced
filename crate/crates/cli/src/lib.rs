//! Driver for the sketchrig toolkit: config loading, stage wrappers and the
//! manifest-producing pipeline.
// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod fixture;
pub mod pipeline;
pub mod rigfile;
pub mod stages;
