//! File formats, parallel experiment runs and the `rssi-cell` command line
//! on top of [`rssi_cell_core`].
//!
//! * [`csv_io`]: the canonical per-set CSV format and the wide-CSV import adapter.
//! * [`models`]: JSON documents for scenarios, fitted HMMs and classifiers.
//! * [`report`]: plot-ready CSV tables and JSON reports.
//! * [`sweep`]: rayon-parallel sweeps with deterministic reduction.
//! * [`manifest`]: run manifests with input and output digests.
//! * [`commands`]: the subcommands, callable as a library.

pub mod commands;
pub mod config;
pub mod csv_io;
mod error;
pub mod manifest;
pub mod models;
pub mod report;
pub mod sweep;

pub use error::{Error, ExitCode, Result};
pub use rssi_cell_core as core;

/// Environment variable naming the default dataset directory.
pub const DATA_DIR_ENV: &str = "RSSI_CELL_DATA_DIR";
