//! Second classification stage: smoothing the classifier's label stream.
//!
//! [`median_filter`] is a purely empirical smoother. The HMM treats the
//! classifier outputs as noisy observations of the true cell, learns its
//! transition and emission probabilities from labeled training data and the
//! classifier's mistakes on it, and filters causally with the forward
//! algorithm ([`hmm_filter`]). [`viterbi`] decodes offline and serves as a
//! reference.

mod hmm;
mod median;
mod viterbi;

pub use hmm::{
    fit_hmm, forward_step, hmm_filter, ForwardState, Hmm, HmmEstimator, HmmParts, DEFAULT_SMOOTHING,
};
pub use median::{median_filter, MedianFilter};
pub use viterbi::{viterbi, viterbi_scored};
