//! Harness around `mpinv-core`: instance generation, matrix file I/O,
//! structured reports, and bound-tightness sweeps.

pub mod analyze;
pub mod error;
pub mod gen;
pub mod matfile;
pub mod report;
pub mod sweep;

pub use error::{CliError, Result};
