//! Command-line front end for `cosetica-core`: CSV ingestion, separation
//! runs with manifests, synthetic mixtures, the oracle check suite and
//! seed-grid benchmarks.

pub mod cli;
pub mod commands;
pub mod error;
pub mod io;
pub mod manifest;

pub use error::{CliError, Result};
