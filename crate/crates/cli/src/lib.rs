//! Command-line pipeline: synthetic data, Gabor extraction, feature
//! selection with the single- and multi-task methods, and ROC evaluation.

pub mod commands;
pub mod config;
pub mod train;

pub use commands::{exit_code, run, Cli};
