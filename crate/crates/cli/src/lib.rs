//! Batch front end for the streamcast harness: CSV ingestion, TOML run
//! configs, and deterministic CSV/JSON outputs.

pub mod config;
pub mod format;
pub mod ingest;
pub mod run;

pub use config::RunConfig;
pub use run::{execute, Failure, Kind, Manifest};
