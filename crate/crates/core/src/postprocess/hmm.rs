use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// Pseudo-count added to every transition and confusion cell before
/// normalization so no observation sequence is impossible.
pub const DEFAULT_SMOOTHING: f64 = 1e-6;

const STOCHASTIC_TOL: f64 = 1e-12;

/// Discrete hidden Markov model whose observations are classifier labels.
///
/// `a[i][j] = p(z_{t+1} = j | z_t = i)`, `b[i][j] = p(y_t = j | z_t = i)`.
/// Matrices are stored row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "HmmParts", into = "HmmParts"))]
pub struct Hmm {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    pi0: Vec<f64>,
    smoothing: f64,
    structural_zeros: Vec<bool>,
}

/// Unvalidated field bag for building and (de)serializing an [`Hmm`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct HmmParts {
    pub n: usize,
    #[cfg_attr(feature = "serde", serde(rename = "A"))]
    pub a: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(rename = "B"))]
    pub b: Vec<f64>,
    pub pi0: Vec<f64>,
    /// Pseudo-count the model was fitted with; informational.
    #[cfg_attr(feature = "serde", serde(default))]
    pub smoothing: f64,
    /// Row-major `n x n`; `true` marks a forbidden transition. Empty means none.
    #[cfg_attr(feature = "serde", serde(default))]
    pub structural_zeros: Vec<bool>,
}

impl From<Hmm> for HmmParts {
    fn from(h: Hmm) -> Self {
        HmmParts {
            n: h.n,
            a: h.a,
            b: h.b,
            pi0: h.pi0,
            smoothing: h.smoothing,
            structural_zeros: h.structural_zeros,
        }
    }
}

impl TryFrom<HmmParts> for Hmm {
    type Error = Error;

    fn try_from(p: HmmParts) -> Result<Self> {
        Hmm::from_parts(p)
    }
}

fn check_distribution(what: &str, row: &[f64]) -> Result<()> {
    if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidModel(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidModel(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

impl Hmm {
    /// Builds a model from row-major matrices, checking stochasticity.
    pub fn new(n: usize, a: Vec<f64>, b: Vec<f64>, pi0: Vec<f64>) -> Result<Self> {
        Hmm::from_parts(HmmParts { n, a, b, pi0, smoothing: 0.0, structural_zeros: Vec::new() })
    }

    pub fn from_parts(p: HmmParts) -> Result<Self> {
        let n = p.n;
        if n == 0 {
            return Err(Error::InvalidModel("model needs at least one state".into()));
        }
        if p.a.len() != n * n || p.b.len() != n * n || p.pi0.len() != n {
            return Err(Error::InvalidModel(format!("matrix sizes do not match n = {n}")));
        }
        if !(p.smoothing >= 0.0) || !p.smoothing.is_finite() {
            return Err(Error::InvalidModel("smoothing must be finite and >= 0".into()));
        }
        let structural_zeros = if p.structural_zeros.is_empty() {
            vec![false; n * n]
        } else if p.structural_zeros.len() == n * n {
            p.structural_zeros
        } else {
            return Err(Error::InvalidModel("structural zero mask must be n x n".into()));
        };
        for i in 0..n {
            check_distribution(&format!("row {i} of A"), &p.a[i * n..(i + 1) * n])?;
            check_distribution(&format!("row {i} of B"), &p.b[i * n..(i + 1) * n])?;
        }
        check_distribution("pi0", &p.pi0)?;
        if let Some(idx) = (0..n * n).find(|&k| structural_zeros[k] && p.a[k] != 0.0) {
            return Err(Error::InvalidModel(format!(
                "transition {} -> {} is structurally zero but has probability {}",
                idx / n,
                idx % n,
                p.a[idx]
            )));
        }
        Ok(Hmm { n, a: p.a, b: p.b, pi0: p.pi0, smoothing: p.smoothing, structural_zeros })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.a[from * self.n + to]
    }

    pub fn emission(&self, state: usize, observed: usize) -> f64 {
        self.b[state * self.n + observed]
    }

    pub fn transition_row(&self, from: usize) -> &[f64] {
        &self.a[from * self.n..(from + 1) * self.n]
    }

    pub fn emission_row(&self, state: usize) -> &[f64] {
        &self.b[state * self.n..(state + 1) * self.n]
    }

    pub fn initial(&self) -> &[f64] {
        &self.pi0
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    pub fn is_structural_zero(&self, from: usize, to: usize) -> bool {
        self.structural_zeros[from * self.n + to]
    }

    fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.n {
            return Err(Error::LabelOutOfRange { label, n: self.n });
        }
        Ok(())
    }
}

/// Accumulates transition bigrams and the truth/prediction confusion over one
/// or more contiguous sequences, then normalizes them into an [`Hmm`].
///
/// Transition rows are normalized by the number of transitions leaving each
/// state, so rows always sum to one. Emission rows are the row-normalized
/// confusion matrix. The initial distribution is uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmEstimator {
    n: usize,
    smoothing: f64,
    structural_zeros: Vec<bool>,
    transitions: Vec<u64>,
    confusion: Vec<u64>,
}

impl HmmEstimator {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModel("model needs at least one state".into()));
        }
        Ok(HmmEstimator {
            n,
            smoothing: DEFAULT_SMOOTHING,
            structural_zeros: vec![false; n * n],
            transitions: vec![0; n * n],
            confusion: vec![0; n * n],
        })
    }

    pub fn smoothing(mut self, eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::InvalidParameter(format!("smoothing must be finite and >= 0, got {eps}")));
        }
        self.smoothing = eps;
        Ok(self)
    }

    /// Declares `from -> to` impossible; it stays zero regardless of counts.
    pub fn forbid(mut self, from: usize, to: usize) -> Result<Self> {
        if from >= self.n || to >= self.n {
            return Err(Error::LabelOutOfRange { label: from.max(to), n: self.n });
        }
        self.structural_zeros[from * self.n + to] = true;
        Ok(self)
    }

    /// Forbids jumps between non-adjacent cells (0 <-> 2 for three cells).
    pub fn forbid_skips(mut self) -> Self {
        for i in 0..self.n {
            for j in 0..self.n {
                if i.abs_diff(j) > 1 {
                    self.structural_zeros[i * self.n + j] = true;
                }
            }
        }
        self
    }

    /// Adds one contiguous sequence of true labels and classifier outputs.
    /// Transitions are only counted within the sequence.
    pub fn observe(&mut self, truth: &[usize], predicted: &[usize]) -> Result<()> {
        if truth.len() != predicted.len() {
            return Err(Error::LengthMismatch { left: truth.len(), right: predicted.len() });
        }
        let n = self.n;
        if let Some(&label) = truth.iter().chain(predicted).find(|&&l| l >= n) {
            return Err(Error::LabelOutOfRange { label, n });
        }
        for w in truth.windows(2) {
            self.transitions[w[0] * n + w[1]] += 1;
        }
        for (&t, &p) in truth.iter().zip(predicted) {
            self.confusion[t * n + p] += 1;
        }
        Ok(())
    }

    pub fn transition_counts(&self) -> &[u64] {
        &self.transitions
    }

    pub fn confusion_counts(&self) -> &[u64] {
        &self.confusion
    }

    pub fn finish(&self) -> Result<Hmm> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        let mut b = vec![0.0; n * n];
        for i in 0..n {
            let row = i * n..(i + 1) * n;
            let allowed: Vec<bool> = self.structural_zeros[row.clone()].iter().map(|z| !z).collect();
            if !allowed.iter().any(|&x| x) {
                return Err(Error::InvalidModel(format!("every transition out of state {i} is forbidden")));
            }
            let counts = &self.transitions[row.clone()];
            normalize_row(&mut a[row.clone()], counts, &allowed, self.smoothing);
            normalize_row(&mut b[row.clone()], &self.confusion[row], &vec![true; n], self.smoothing);
        }
        Hmm::from_parts(HmmParts {
            n,
            a,
            b,
            pi0: vec![1.0 / n as f64; n],
            smoothing: self.smoothing,
            structural_zeros: self.structural_zeros.clone(),
        })
    }
}

/// Writes `(count + eps) / total` over allowed cells, or a uniform row over
/// allowed cells when there is no mass at all.
fn normalize_row(out: &mut [f64], counts: &[u64], allowed: &[bool], eps: f64) {
    let mass = |k: usize| if allowed[k] { counts[k] as f64 + eps } else { 0.0 };
    let total: f64 = (0..out.len()).map(mass).sum();
    if total > 0.0 {
        for (k, o) in out.iter_mut().enumerate() {
            *o = mass(k) / total;
        }
    } else {
        let m = allowed.iter().filter(|&&x| x).count() as f64;
        for (o, &ok) in out.iter_mut().zip(allowed) {
            *o = if ok { 1.0 / m } else { 0.0 };
        }
    }
}

/// Fits a model from one labeled sequence and the classifier's outputs on it,
/// with default smoothing and no structural zeros.
pub fn fit_hmm(truth: &[usize], predicted: &[usize], n: usize) -> Result<Hmm> {
    if truth.len() != predicted.len() {
        return Err(Error::LengthMismatch { left: truth.len(), right: predicted.len() });
    }
    if truth.len() < 2 {
        return Err(Error::InvalidParameter("fitting needs at least two frames".into()));
    }
    let mut est = HmmEstimator::new(n)?;
    est.observe(truth, predicted)?;
    est.finish()
}

/// Filtered state distribution after `t` observations; `t = 0` holds the prior.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardState {
    pi: Vec<f64>,
    t: usize,
}

impl ForwardState {
    pub fn new(hmm: &Hmm) -> Self {
        ForwardState { pi: hmm.pi0.clone(), t: 0 }
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Number of observations consumed.
    pub fn t(&self) -> usize {
        self.t
    }

    /// Most probable state; ties go to the smallest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.pi)
    }

    /// Consumes one observation in place.
    pub fn step(&mut self, hmm: &Hmm, observed: usize) -> Result<()> {
        hmm.check_label(observed)?;
        let n = hmm.n;
        let mut next = if self.t == 0 {
            self.pi.clone()
        } else {
            let mass: f64 = self.pi.iter().sum();
            let mut prior = vec![0.0; n];
            for (i, &p) in self.pi.iter().enumerate() {
                for (dst, &a) in prior.iter_mut().zip(hmm.transition_row(i)) {
                    *dst += p * a;
                }
            }
            prior.iter_mut().for_each(|v| *v /= mass);
            prior
        };
        for (i, v) in next.iter_mut().enumerate() {
            *v *= hmm.emission(i, observed);
        }
        let total: f64 = next.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::ImpossibleObservation { step: self.t + 1 });
        }
        next.iter_mut().for_each(|v| *v /= total);
        self.pi = next;
        self.t += 1;
        Ok(())
    }
}

/// One forward-algorithm update: propagate through `A`, weight by the
/// likelihood of `observed` in each state, renormalize.
pub fn forward_step(state: &ForwardState, hmm: &Hmm, observed: usize) -> Result<ForwardState> {
    let mut next = state.clone();
    next.step(hmm, observed)?;
    Ok(next)
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Causal HMM smoothing: each output is the most probable state given the
/// observations up to and including that frame.
pub fn hmm_filter(y_hat: &[usize], hmm: &Hmm) -> Result<Vec<usize>> {
    if y_hat.is_empty() {
        return Err(Error::EmptySequence);
    }
    let mut state = ForwardState::new(hmm);
    y_hat
        .iter()
        .map(|&y| {
            state.step(hmm, y)?;
            Ok(state.argmax())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn identity(n: usize) -> Vec<f64> {
        (0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect()
    }

    fn uniform(n: usize) -> Vec<f64> {
        vec![1.0 / n as f64; n]
    }

    #[test]
    fn bigram_estimate_before_smoothing() {
        let mut est = HmmEstimator::new(3).unwrap().smoothing(0.0).unwrap();
        est.observe(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap();
        assert_eq!(est.transition_counts(), &[1, 1, 0, 0, 1, 0, 0, 0, 0]);
        let hmm = est.finish().unwrap();
        assert_eq!(hmm.transition(0, 0), 0.5);
        assert_eq!(hmm.transition(0, 1), 0.5);
        assert_eq!(hmm.transition(1, 1), 1.0);
        // state 2 never seen: uniform fallback
        assert_eq!(hmm.transition_row(2), &uniform(3)[..]);
        assert_eq!(hmm.initial(), &[1.0 / 3.0; 3]);
    }

    #[test]
    fn perfect_predictions_give_identity_emissions() {
        let truth = [0, 0, 1, 1, 2, 2, 1, 0];
        let mut est = HmmEstimator::new(3).unwrap().smoothing(0.0).unwrap();
        est.observe(&truth, &truth).unwrap();
        let hmm = est.finish().unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(hmm.emission(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn emissions_are_row_normalized_confusion() {
        // truth 0 -> predicted {0,0,0,1}; truth 1 -> {1,2}
        let mut est = HmmEstimator::new(3).unwrap().smoothing(0.0).unwrap();
        est.observe(&[0, 0, 0, 0, 1, 1], &[0, 0, 0, 1, 1, 2]).unwrap();
        let hmm = est.finish().unwrap();
        assert_eq!(hmm.emission_row(0), &[0.75, 0.25, 0.0]);
        assert_eq!(hmm.emission_row(1), &[0.0, 0.5, 0.5]);
    }

    #[test]
    fn smoothed_rows_are_stochastic() {
        let hmm = fit_hmm(&[0, 0, 1, 1, 2, 2, 2], &[0, 1, 1, 1, 2, 0, 2], 3).unwrap();
        for i in 0..3 {
            assert!((hmm.transition_row(i).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!((hmm.emission_row(i).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(hmm.transition_row(i).iter().all(|&v| v > 0.0));
            assert!(hmm.emission_row(i).iter().all(|&v| v > 0.0));
        }
        assert_eq!(hmm.smoothing(), DEFAULT_SMOOTHING);
    }

    #[test]
    fn sequences_do_not_bridge() {
        let mut est = HmmEstimator::new(3).unwrap();
        est.observe(&[0, 0], &[0, 0]).unwrap();
        est.observe(&[2, 2], &[2, 2]).unwrap();
        assert_eq!(est.transition_counts()[2], 0);
        assert_eq!(est.transition_counts()[0], 1);
        assert_eq!(est.transition_counts()[8], 1);
    }

    #[test]
    fn structural_zeros_survive_smoothing() {
        let mut est = HmmEstimator::new(3).unwrap().forbid_skips();
        est.observe(&[0, 0, 1, 2, 2, 1, 0], &[0, 0, 1, 2, 2, 1, 0]).unwrap();
        let hmm = est.finish().unwrap();
        assert_eq!(hmm.transition(0, 2), 0.0);
        assert_eq!(hmm.transition(2, 0), 0.0);
        assert!(hmm.is_structural_zero(0, 2));
        assert!(hmm.transition(0, 1) > 0.0);
        assert!((hmm.transition_row(0).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(fit_hmm(&[0, 1], &[0], 3), Err(Error::LengthMismatch { .. })));
        assert!(fit_hmm(&[0], &[0], 3).is_err());
        assert!(matches!(fit_hmm(&[0, 3], &[0, 0], 3), Err(Error::LabelOutOfRange { .. })));
        let all_forbidden = (0..3).try_fold(HmmEstimator::new(3).unwrap(), |e, j| e.forbid(1, j)).unwrap();
        assert!(all_forbidden.finish().is_err());
    }

    #[test]
    fn model_validation() {
        assert!(Hmm::new(2, vec![0.5, 0.5, 1.0, 0.0], identity(2), uniform(2)).is_ok());
        assert!(Hmm::new(2, vec![0.5, 0.6, 1.0, 0.0], identity(2), uniform(2)).is_err());
        assert!(Hmm::new(2, vec![1.5, -0.5, 1.0, 0.0], identity(2), uniform(2)).is_err());
        assert!(Hmm::new(2, identity(2), identity(2), vec![0.7, 0.7]).is_err());
        assert!(Hmm::new(2, identity(3), identity(2), uniform(2)).is_err());
        assert!(Hmm::new(0, vec![], vec![], vec![]).is_err());
        let parts = HmmParts {
            n: 2,
            a: vec![0.5, 0.5, 0.0, 1.0],
            b: identity(2),
            pi0: uniform(2),
            smoothing: 0.0,
            structural_zeros: vec![false, true, false, false],
        };
        assert!(Hmm::from_parts(parts).is_err());
    }

    #[test]
    fn deterministic_model_tracks_observation() {
        let hmm = Hmm::new(3, identity(3), identity(3), uniform(3)).unwrap();
        let s = forward_step(&ForwardState::new(&hmm), &hmm, 1).unwrap();
        assert_eq!(s.pi(), &[0.0, 1.0, 0.0]);
        assert_eq!(s.t(), 1);
        // identity transitions make a switch impossible
        assert_eq!(forward_step(&s, &hmm, 2), Err(Error::ImpossibleObservation { step: 2 }));
    }

    #[test]
    fn uniform_transitions_give_emission_column() {
        let b = vec![0.7, 0.2, 0.1, 0.3, 0.3, 0.4, 0.05, 0.15, 0.8];
        let a = vec![1.0 / 3.0; 9];
        let hmm = Hmm::new(3, a, b.clone(), vec![0.2, 0.5, 0.3]).unwrap();
        let mut s = ForwardState::new(&hmm);
        s.step(&hmm, 0).unwrap();
        s.step(&hmm, 2).unwrap();
        let col: Vec<f64> = (0..3).map(|i| b[i * 3 + 2]).collect();
        let total: f64 = col.iter().sum();
        for (p, c) in s.pi().iter().zip(&col) {
            assert_relative_eq!(*p, c / total, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_state_hand_step() {
        let hmm = Hmm::new(2, vec![0.9, 0.1, 0.1, 0.9], vec![0.8, 0.2, 0.2, 0.8], vec![0.5, 0.5]).unwrap();
        let s = forward_step(&ForwardState::new(&hmm), &hmm, 0).unwrap();
        assert_relative_eq!(s.pi()[0], 0.8, epsilon = 1e-15);
        assert_relative_eq!(s.pi()[1], 0.2, epsilon = 1e-15);
        // second step: prior [.74, .26], weighted [.592, .052]
        let s = forward_step(&s, &hmm, 0).unwrap();
        assert_relative_eq!(s.pi()[0], 0.592 / 0.644, epsilon = 1e-12);
    }

    #[test]
    fn identity_emissions_pass_through() {
        let a = vec![0.9, 0.05, 0.05, 0.05, 0.9, 0.05, 0.05, 0.05, 0.9];
        let hmm = Hmm::new(3, a, identity(3), uniform(3)).unwrap();
        let y = [0, 0, 2, 1, 1, 0, 2, 2];
        assert_eq!(hmm_filter(&y, &hmm).unwrap(), y);
    }

    #[test]
    fn isolated_flip_is_suppressed() {
        let a = vec![0.96, 0.02, 0.02, 0.02, 0.96, 0.02, 0.02, 0.02, 0.96];
        let b = vec![0.8, 0.1, 0.1, 0.1, 0.8, 0.1, 0.1, 0.1, 0.8];
        let hmm = Hmm::new(3, a, b, uniform(3)).unwrap();
        let y = [1, 1, 1, 1, 2, 1, 1, 1];
        assert_eq!(hmm_filter(&y, &hmm).unwrap(), [1; 8]);
    }

    #[test]
    fn truth_fitted_model_reproduces_input() {
        let truth: Vec<usize> = [0; 20].iter().chain(&[1; 20]).chain(&[2; 20]).chain(&[1; 20]).chain(&[0; 20]).copied().collect();
        let mut est = HmmEstimator::new(3).unwrap().smoothing(0.0).unwrap();
        est.observe(&truth, &truth).unwrap();
        let hmm = est.finish().unwrap();
        assert_eq!(hmm_filter(&truth, &hmm).unwrap(), truth);
    }

    #[test]
    fn constant_zero_observations_stay_zero() {
        // column 0 of B maximal at state 0 and column 0 of A dominating each row
        let a = vec![0.5, 0.3, 0.2, 0.4, 0.4, 0.2, 0.5, 0.1, 0.4];
        let b = vec![0.6, 0.3, 0.1, 0.5, 0.4, 0.1, 0.2, 0.2, 0.6];
        let hmm = Hmm::new(3, a, b, uniform(3)).unwrap();
        assert_eq!(hmm_filter(&[0; 30], &hmm).unwrap(), [0; 30]);

        // without a condition on A the claim fails: state 0 always leaves
        let a = vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        let b = vec![0.5, 0.5, 0.0, 0.4, 0.6, 0.0, 0.0, 0.0, 1.0];
        let hmm = Hmm::new(3, a, b, uniform(3)).unwrap();
        assert_eq!(hmm_filter(&[0, 0], &hmm).unwrap(), [0, 1]);
    }

    #[test]
    fn filter_errors() {
        let hmm = Hmm::new(2, identity(2), identity(2), uniform(2)).unwrap();
        assert_eq!(hmm_filter(&[], &hmm), Err(Error::EmptySequence));
        assert_eq!(hmm_filter(&[0, 5], &hmm), Err(Error::LabelOutOfRange { label: 5, n: 2 }));
    }
}
