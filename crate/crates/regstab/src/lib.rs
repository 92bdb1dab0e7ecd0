//! File formats, experiment harness, real-data ingestion and the `regstab`
//! command line, on top of `regstab-core`.

pub mod cli;
pub mod error;
pub mod formats;
pub mod harness;
pub mod ingest;
pub mod report;

pub use error::{AppError, Result};
