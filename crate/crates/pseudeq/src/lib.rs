//! Experiment harness for `pseudeq-core`: seeded datasets, JSON/CSV file
//! formats, manifests and the commands behind the `pseudeq` binary.
//!
//! Every command is a pure function of its configuration, its input files
//! and its seed. Timing columns are zero unless a command is asked to record
//! wall-clock time.

pub mod commands;
pub mod dataset;
pub mod dto;
pub mod error;
pub mod io;
pub mod manifest;
pub mod threads;

pub use error::{HarnessError, Result};
