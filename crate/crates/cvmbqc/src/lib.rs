//! File formats, sweeps and the command-line front end for the `cvmbqc`
//! gate-noise analysis. All numerics live in `cvmbqc-core`.

pub mod cache;
pub mod error;
pub mod optimize;
pub mod sweep;
pub mod verify;

pub use error::{CliError, Result};
