use alloc::vec;
use alloc::vec::Vec;

use super::Hmm;
use crate::{Error, Result};

fn ln(p: f64) -> f64 {
    if p > 0.0 { libm::log(p) } else { f64::NEG_INFINITY }
}

/// Most probable hidden state path and its joint log-probability
/// `ln p(z_{1:T}, y_{1:T})`. Offline: needs the whole observation sequence.
///
/// Among equally probable predecessors the smallest state index is kept, as
/// is the smallest final state.
pub fn viterbi_scored(y_hat: &[usize], hmm: &Hmm) -> Result<(Vec<usize>, f64)> {
    if y_hat.is_empty() {
        return Err(Error::EmptySequence);
    }
    let n = hmm.n();
    if let Some(&label) = y_hat.iter().find(|&&y| y >= n) {
        return Err(Error::LabelOutOfRange { label, n });
    }
    let log_a: Vec<f64> = (0..n * n).map(|k| ln(hmm.transition(k / n, k % n))).collect();
    let mut delta: Vec<f64> = (0..n).map(|i| ln(hmm.initial()[i]) + ln(hmm.emission(i, y_hat[0]))).collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(y_hat.len().saturating_sub(1));

    for &y in &y_hat[1..] {
        let mut next = vec![f64::NEG_INFINITY; n];
        let mut from = vec![0usize; n];
        for j in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for i in 0..n {
                let score = delta[i] + log_a[i * n + j];
                if score > best {
                    best = score;
                    arg = i;
                }
            }
            next[j] = best + ln(hmm.emission(j, y));
            from[j] = arg;
        }
        delta = next;
        back.push(from);
    }

    let last = super::hmm::argmax(&delta);
    let score = delta[last];
    if score == f64::NEG_INFINITY {
        return Err(Error::ImpossibleObservation { step: y_hat.len() });
    }
    let mut path = vec![last; y_hat.len()];
    for t in (1..y_hat.len()).rev() {
        path[t - 1] = back[t - 1][path[t]];
    }
    Ok((path, score))
}

pub fn viterbi(y_hat: &[usize], hmm: &Hmm) -> Result<Vec<usize>> {
    viterbi_scored(y_hat, hmm).map(|(path, _)| path)
}
