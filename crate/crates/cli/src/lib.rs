//! Configuration, experiment drivers and CSV output for the `spherepol`
//! command-line tool.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiments;
pub mod output;

pub use config::{ConfigError, RunConfig};
