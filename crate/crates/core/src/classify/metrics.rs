use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

fn check_pair(truth: &[usize], pred: &[usize]) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch { left: truth.len(), right: pred.len() });
    }
    if truth.is_empty() {
        return Err(Error::EmptySequence);
    }
    Ok(())
}

/// Fraction of positions where the prediction equals the truth.
pub fn accuracy(truth: &[usize], pred: &[usize]) -> Result<f64> {
    check_pair(truth, pred)?;
    let hits = truth.iter().zip(pred).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// `counts[i][j]` = number of frames with true state `i` predicted as `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(n: usize) -> Self {
        ConfusionMatrix { counts: vec![vec![0; n]; n] }
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n()).map(|i| self.counts[i][i]).sum()
    }

    /// `trace / total`; `None` when nothing was counted.
    pub fn accuracy(&self) -> Option<f64> {
        let total = self.total();
        (total > 0).then(|| self.trace() as f64 / total as f64)
    }

    pub fn add(&mut self, truth: usize, pred: usize) -> Result<()> {
        let n = self.n();
        for label in [truth, pred] {
            if label >= n {
                return Err(Error::LabelOutOfRange { label, n });
            }
        }
        self.counts[truth][pred] += 1;
        Ok(())
    }
}

pub fn confusion(truth: &[usize], pred: &[usize], n: usize) -> Result<ConfusionMatrix> {
    check_pair(truth, pred)?;
    let mut c = ConfusionMatrix::zeros(n);
    for (&t, &p) in truth.iter().zip(pred) {
        c.add(t, p)?;
    }
    Ok(c)
}
