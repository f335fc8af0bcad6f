// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibrator;
pub mod camera;
pub mod config;
pub mod error;
pub mod error_model;
pub mod fusion;
pub mod geodesy;
pub mod ingest;
pub mod pipeline;
pub mod plot;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};
