//! Two-stage RSSI cell-level localization.
//!
//! The first stage classifies each superframe's RSSI vector (raw, or as
//! short-term mean/variance moments) into one of a few coarse cells with a
//! point classifier. The second stage exploits the temporal correlation of the
//! trace with either a causal windowed median filter or a hidden Markov model
//! learned from the classifier's own training-phase mistakes and run with the
//! forward algorithm.
//!
//! This crate is `no_std` (it needs `alloc`). File formats, parallel sweeps and
//! the command line live in the `rssi-cell` companion crate.
//!
//! ```
//! use rssi_cell_core::postprocess::{fit_hmm, hmm_filter};
//!
//! // labeled training trace and the classifier's (imperfect) output on it
//! let truth: Vec<usize> = [0; 30].into_iter().chain([1; 30]).collect();
//! let mut noisy = truth.clone();
//! for t in [4, 11, 23, 37, 50] {
//!     noisy[t] = 1 - noisy[t];
//! }
//! let hmm = fit_hmm(&truth, &noisy, 3).unwrap();
//! let smoothed = hmm_filter(&[0, 0, 0, 1, 0, 0], &hmm).unwrap();
//! assert_eq!(smoothed, [0, 0, 0, 0, 0, 0]);
//! //! ```

#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod classify;
pub mod dataset;
mod error;
pub mod eval;
pub mod features;
pub mod postprocess;
pub mod synth;

pub use error::{Error, Result};

/// Number of localization cells: 0 outside, 1 inside, 2 inside on the test position.
pub const N_CELLS: usize = 3;
