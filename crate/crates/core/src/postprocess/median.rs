use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Streaming causal median over the current label and the `m` before it.
///
/// Even-sized windows (during warm-up) take the lower median so the output
/// is always a label that occurred in the window.
#[derive(Debug, Clone)]
pub struct MedianFilter {
    m: usize,
    window: VecDeque<usize>,
    scratch: Vec<usize>,
}

impl MedianFilter {
    pub fn new(m: usize) -> Self {
        MedianFilter { m, window: VecDeque::with_capacity(m + 1), scratch: Vec::with_capacity(m + 1) }
    }

    pub fn push(&mut self, label: usize) -> usize {
        if self.window.len() == self.m + 1 {
            self.window.pop_front();
        }
        self.window.push_back(label);
        self.scratch.clear();
        self.scratch.extend(self.window.iter().copied());
        self.scratch.sort_unstable();
        self.scratch[(self.scratch.len() - 1) / 2]
    }
}

/// `z_t = median(y_{t-m}, ..., y_t)`, truncated at the start of the sequence.
pub fn median_filter(y_hat: &[usize], m: usize) -> Result<Vec<usize>> {
    if y_hat.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut f = MedianFilter::new(m);
    Ok(y_hat.iter().map(|&y| f.push(y)).collect())
}
