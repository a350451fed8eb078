//! End-to-end experiments: train on whole measurement sets, evaluate causally
//! on a held-out set, and average over splits, node masks and window lengths.
//!
//! Sweeps are broken into independent [`SweepJob`]s (one classifier fit each)
//! so callers can run them in parallel; [`aggregate_l`] and
//! [`aggregate_masks`] reduce the cells in a fixed order, so the result does
//! not depend on how the jobs were scheduled.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::classify::{Classifier, ConfusionMatrix, Knn, KnnParams, TrainingSet};
use crate::dataset::{enumerate_node_masks, select_nodes, MeasurementSet, NodeMask, SplitPlan};
use crate::features::{extract, FeatureVector};
use crate::postprocess::{hmm_filter, median_filter, Hmm, HmmEstimator, DEFAULT_SMOOTHING};
use crate::{Error, Result, N_CELLS};

/// Largest node count whose masks are enumerated implicitly.
pub const MAX_ENUMERATED_NODES: usize = 16;

/// Second-stage filter selection.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum FilterSpec {
    None,
    Median {
        m: usize,
    },
    Hmm {
        #[cfg_attr(feature = "serde", serde(default = "default_smoothing"))]
        smoothing: f64,
        /// Forbid transitions between non-adjacent cells.
        #[cfg_attr(feature = "serde", serde(default))]
        forbid_skips: bool,
    },
}

#[cfg(feature = "serde")]
fn default_smoothing() -> f64 {
    DEFAULT_SMOOTHING
}

impl FilterSpec {
    pub fn hmm() -> Self {
        FilterSpec::Hmm { smoothing: DEFAULT_SMOOTHING, forbid_skips: false }
    }

    /// Short name used in tables: `none`, `median(5)`, `hmm`, `hmm-adjacent`.
    pub fn name(&self) -> String {
        match *self {
            FilterSpec::None => "none".into(),
            FilterSpec::Median { m } => format!("median({m})"),
            FilterSpec::Hmm { forbid_skips: false, .. } => "hmm".into(),
            FilterSpec::Hmm { forbid_skips: true, .. } => "hmm-adjacent".into(),
        }
    }

    pub fn needs_training_predictions(&self) -> bool {
        matches!(self, FilterSpec::Hmm { .. })
    }

    /// Fits the filter from per-set (truth, classifier output) sequences.
    pub fn fit(&self, training: &[(Vec<usize>, Vec<usize>)]) -> Result<FittedFilter> {
        Ok(match *self {
            FilterSpec::None => FittedFilter::None,
            FilterSpec::Median { m } => FittedFilter::Median(m),
            FilterSpec::Hmm { smoothing, forbid_skips } => {
                let mut est = HmmEstimator::new(N_CELLS)?.smoothing(smoothing)?;
                if forbid_skips {
                    est = est.forbid_skips();
                }
                for (truth, pred) in training {
                    est.observe(truth, pred)?;
                }
                FittedFilter::Hmm(est.finish()?)
            }
        })
    }
}

/// A second stage ready to run on classifier output.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedFilter {
    None,
    Median(usize),
    Hmm(Hmm),
}

impl FittedFilter {
    pub fn apply(&self, y_hat: &[usize]) -> Result<Vec<usize>> {
        match self {
            FittedFilter::None => Ok(y_hat.to_vec()),
            FittedFilter::Median(m) => median_filter(y_hat, *m),
            FittedFilter::Hmm(hmm) => hmm_filter(y_hat, hmm),
        }
    }

    pub fn hmm(&self) -> Option<&Hmm> {
        match self {
            FittedFilter::Hmm(h) => Some(h),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PipelineConfig {
    pub node_mask: NodeMask,
    /// Moment window; 1 means raw RSSI features.
    pub moment_l: usize,
    pub knn: KnnParams,
    pub filter: FilterSpec,
    /// Recorded in every report; the pipeline itself draws no random numbers.
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(node_mask: NodeMask, moment_l: usize, filter: FilterSpec) -> Self {
        PipelineConfig { node_mask, moment_l, knn: KnnParams::default(), filter, seed: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.moment_l == 0 {
            return Err(Error::InvalidParameter("moment_l must be >= 1".into()));
        }
        if self.knn.k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Measurement sets keyed by id; all share one node layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SetCollection {
    sets: BTreeMap<String, MeasurementSet>,
    node_labels: Vec<String>,
}

impl SetCollection {
    pub fn new(sets: Vec<MeasurementSet>) -> Result<Self> {
        let Some(first) = sets.first() else {
            return Err(Error::InvalidSplit("no measurement sets".into()));
        };
        let node_labels = first.node_labels().to_vec();
        let mut map = BTreeMap::new();
        for set in sets {
            if set.node_labels() != node_labels.as_slice() {
                return Err(Error::NodeLabelsDiffer(set.id().to_string()));
            }
            let id = set.id().to_string();
            if map.insert(id.clone(), set).is_some() {
                return Err(Error::InvalidSplit(format!("duplicate set id {id:?}")));
            }
        }
        Ok(SetCollection { sets: map, node_labels })
    }

    pub fn get(&self, id: &str) -> Result<&MeasurementSet> {
        self.sets.get(id).ok_or_else(|| Error::MissingSet(id.to_string()))
    }

    /// Set ids in sorted order.
    pub fn ids(&self) -> Vec<String> {
        self.sets.keys().cloned().collect()
    }

    pub fn node_labels(&self) -> &[String] {
        &self.node_labels
    }

    pub fn n_nodes(&self) -> usize {
        self.node_labels.len()
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &MeasurementSet> {
        self.sets.values()
    }
}

/// Node projection followed by feature extraction for one set.
pub fn set_features(set: &MeasurementSet, mask: NodeMask, moment_l: usize) -> Result<Vec<FeatureVector>> {
    extract(select_nodes(set, mask)?.frames(), moment_l)
}

/// First stage fitted on whole training sets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier {
    mask: NodeMask,
    moment_l: usize,
    knn: Knn,
    /// Per training set: labels and the features the classifier saw.
    training: Vec<(Vec<usize>, Vec<FeatureVector>)>,
}

impl TrainedClassifier {
    pub fn fit(train: &[&MeasurementSet], mask: NodeMask, moment_l: usize, params: KnnParams) -> Result<Self> {
        let mut training = Vec::with_capacity(train.len());
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for set in train {
            let truth = set.labels()?;
            let feats = set_features(set, mask, moment_l)?;
            rows.extend(feats.iter().map(|f| f.values.clone()));
            labels.extend_from_slice(&truth);
            training.push((truth, feats));
        }
        let knn = Knn::fit(&TrainingSet::new(rows, labels)?, params)?;
        Ok(TrainedClassifier { mask, moment_l, knn, training })
    }

    pub fn knn(&self) -> &Knn {
        &self.knn
    }

    pub fn predict_set(&self, set: &MeasurementSet) -> Result<Vec<usize>> {
        self.knn.predict_all(&set_features(set, self.mask, self.moment_l)?)
    }

    /// The classifier's outputs on its own training sets, paired with the truth.
    pub fn training_predictions(&self) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
        self.training
            .iter()
            .map(|(truth, feats)| Ok((truth.clone(), self.knn.predict_all(feats)?)))
            .collect()
    }
}

/// Both stages, ready to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPipeline {
    pub classifier: TrainedClassifier,
    pub filter: FittedFilter,
}

impl TrainedPipeline {
    pub fn fit(sets: &SetCollection, train_ids: &[String], cfg: &PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let train: Vec<&MeasurementSet> = train_ids.iter().map(|id| sets.get(id)).collect::<Result<_>>()?;
        let classifier = TrainedClassifier::fit(&train, cfg.node_mask, cfg.moment_l, cfg.knn)?;
        let training = if cfg.filter.needs_training_predictions() {
            classifier.training_predictions()?
        } else {
            Vec::new()
        };
        let filter = cfg.filter.fit(&training)?;
        Ok(TrainedPipeline { classifier, filter })
    }

    pub fn evaluate(&self, set: &MeasurementSet) -> Result<Evaluation> {
        let y_hat = self.classifier.predict_set(set)?;
        let z_hat = self.filter.apply(&y_hat)?;
        score(set, &y_hat, &z_hat)
    }
}

/// One frame of the prediction trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictionRow {
    pub t: u64,
    pub truth: Option<usize>,
    pub y_hat: usize,
    pub z_hat: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<PredictionRow>,
}

/// Scores the filtered output on the labeled frames of `set`.
pub fn score(set: &MeasurementSet, y_hat: &[usize], z_hat: &[usize]) -> Result<Evaluation> {
    if y_hat.len() != set.len() || z_hat.len() != set.len() {
        return Err(Error::LengthMismatch { left: set.len(), right: y_hat.len().min(z_hat.len()) });
    }
    let mut confusion = ConfusionMatrix::zeros(N_CELLS);
    let mut predictions = Vec::with_capacity(set.len());
    for ((frame, &y), &z) in set.frames().iter().zip(y_hat).zip(z_hat) {
        let truth = frame.label.map(usize::from);
        if let Some(truth) = truth {
            confusion.add(truth, z)?;
        }
        predictions.push(PredictionRow { t: frame.t, truth, y_hat: y, z_hat: z });
    }
    let accuracy = confusion.accuracy().ok_or(Error::NoScoredFrames)?;
    Ok(Evaluation { accuracy, confusion, predictions })
}

/// Result of one (split, configuration) pipeline run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub config: PipelineConfig,
    pub split: SplitPlan,
    /// Equals `trace(confusion) / sum(confusion)` over the filtered output.
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<PredictionRow>,
    pub seed: u64,
}

/// Trains on the split's training sets and evaluates on its validation set.
pub fn run_pipeline(sets: &SetCollection, split: &SplitPlan, cfg: &PipelineConfig) -> Result<EvalReport> {
    run_pipeline_trained(sets, split, cfg).map(|(report, _)| report)
}

/// Like [`run_pipeline`], also returning the trained stages.
pub fn run_pipeline_trained(
    sets: &SetCollection,
    split: &SplitPlan,
    cfg: &PipelineConfig,
) -> Result<(EvalReport, TrainedPipeline)> {
    split.validate()?;
    let val = sets.get(&split.val_id)?;
    let pipeline = TrainedPipeline::fit(sets, &split.train_ids, cfg)?;
    let eval = pipeline.evaluate(val)?;
    let report = EvalReport {
        config: cfg.clone(),
        split: split.clone(),
        accuracy: eval.accuracy,
        confusion: eval.confusion,
        predictions: eval.predictions,
        seed: cfg.seed,
    };
    Ok((report, pipeline))
}

/// One classifier fit shared by every validation set that uses the same
/// training sets, node mask and window length.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepJob {
    pub mask: NodeMask,
    pub moment_l: usize,
    pub train_ids: Vec<String>,
    /// (index into the split list, validation set id)
    pub validations: Vec<(usize, String)>,
}

/// Accuracy of one (L, filter, mask, split) combination.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepCell {
    pub moment_l: usize,
    pub filter: usize,
    pub mask: u64,
    pub split: usize,
    pub accuracy: f64,
}

/// Jobs for every (mask, L, training group) in deterministic order.
pub fn plan_jobs(splits: &[SplitPlan], l_values: &[usize], masks: &[NodeMask]) -> Result<Vec<SweepJob>> {
    if splits.is_empty() || l_values.is_empty() || masks.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one split, L value and mask".into()));
    }
    if let Some(&l) = l_values.iter().find(|&&l| l == 0) {
        return Err(Error::InvalidParameter(format!("invalid window length {l}")));
    }
    // (training ids, [(split index, validation id)])
    type Group = (Vec<String>, Vec<(usize, String)>);
    let mut groups: Vec<Group> = Vec::new();
    for (idx, split) in splits.iter().enumerate() {
        split.validate()?;
        match groups.iter_mut().find(|(train, _)| *train == split.train_ids) {
            Some((_, vals)) => vals.push((idx, split.val_id.clone())),
            None => groups.push((split.train_ids.clone(), vec![(idx, split.val_id.clone())])),
        }
    }
    let mut jobs = Vec::with_capacity(masks.len() * l_values.len() * groups.len());
    for &mask in masks {
        for &moment_l in l_values {
            for (train_ids, validations) in &groups {
                jobs.push(SweepJob { mask, moment_l, train_ids: train_ids.clone(), validations: validations.clone() });
            }
        }
    }
    Ok(jobs)
}

/// Fits one classifier and scores every filter on every validation set of the job.
pub fn run_job(sets: &SetCollection, job: &SweepJob, knn: KnnParams, filters: &[FilterSpec]) -> Result<Vec<SweepCell>> {
    let train: Vec<&MeasurementSet> = job.train_ids.iter().map(|id| sets.get(id)).collect::<Result<_>>()?;
    let classifier = TrainedClassifier::fit(&train, job.mask, job.moment_l, knn)?;
    let training = if filters.iter().any(FilterSpec::needs_training_predictions) {
        classifier.training_predictions()?
    } else {
        Vec::new()
    };
    let fitted: Vec<FittedFilter> = filters.iter().map(|f| f.fit(&training)).collect::<Result<_>>()?;
    let mut cells = Vec::with_capacity(job.validations.len() * filters.len());
    for (split, val_id) in &job.validations {
        let val = sets.get(val_id)?;
        let y_hat = classifier.predict_set(val)?;
        for (filter, f) in fitted.iter().enumerate() {
            let z_hat = f.apply(&y_hat)?;
            let accuracy = score(val, &y_hat, &z_hat)?.accuracy;
            cells.push(SweepCell { moment_l: job.moment_l, filter, mask: job.mask.bits(), split: *split, accuracy });
        }
    }
    Ok(cells)
}

/// Mean accuracy of one (L, filter) over all its mask x split cells.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub moment_l: usize,
    pub filter: FilterSpec,
    pub mean_accuracy: f64,
    pub n_cells: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    pub fn get(&self, moment_l: usize, filter: &FilterSpec) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.moment_l == moment_l && &r.filter == filter)
            .map(|r| r.mean_accuracy)
    }
}

fn sort_cells(cells: &mut [SweepCell]) {
    cells.sort_by(|a, b| {
        (a.moment_l, a.filter, a.mask, a.split).cmp(&(b.moment_l, b.filter, b.mask, b.split))
    });
}

/// Unweighted means per (L, filter); rows follow the order of the inputs.
pub fn aggregate_l(l_values: &[usize], filters: &[FilterSpec], mut cells: Vec<SweepCell>) -> SweepTable {
    sort_cells(&mut cells);
    let mut rows = Vec::with_capacity(l_values.len() * filters.len());
    for &l in l_values {
        for (fi, filter) in filters.iter().enumerate() {
            let (sum, n) = cells
                .iter()
                .filter(|c| c.moment_l == l && c.filter == fi)
                .fold((0.0, 0usize), |(s, n), c| (s + c.accuracy, n + 1));
            let mean_accuracy = if n > 0 { sum / n as f64 } else { f64::NAN };
            rows.push(SweepRow { moment_l: l, filter: *filter, mean_accuracy, n_cells: n });
        }
    }
    SweepTable { rows, cells }
}

/// Mean accuracy per (L, filter) over every requested split and mask.
pub fn sweep_l(
    sets: &SetCollection,
    splits: &[SplitPlan],
    l_values: &[usize],
    masks: &[NodeMask],
    filters: &[FilterSpec],
    knn: KnnParams,
) -> Result<SweepTable> {
    if filters.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one filter".into()));
    }
    let jobs = plan_jobs(splits, l_values, masks)?;
    let mut cells = Vec::new();
    for job in &jobs {
        cells.extend(run_job(sets, job, knn, filters)?);
    }
    Ok(aggregate_l(l_values, filters, cells))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MaskRow {
    pub mask: NodeMask,
    pub mean_accuracy: f64,
    pub n_splits: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MaskSweep {
    pub rows: Vec<MaskRow>,
    pub bins: Vec<HistogramBin>,
    pub cells: Vec<SweepCell>,
}

/// Masks to sweep: all non-empty subsets unless an explicit list is given.
pub fn masks_or_all(n_nodes: usize, explicit: Option<&[NodeMask]>) -> Result<Vec<NodeMask>> {
    match explicit {
        Some(list) => Ok(list.to_vec()),
        None if n_nodes > MAX_ENUMERATED_NODES => Err(Error::InvalidParameter(format!(
            "{n_nodes} nodes give 2^{n_nodes} - 1 masks; pass an explicit mask list (limit {MAX_ENUMERATED_NODES} nodes)"
        ))),
        None => enumerate_node_masks(n_nodes),
    }
}

/// Fixed-width histogram over [0, 1]; accuracy 1.0 lands in the last bin.
pub fn histogram(values: impl IntoIterator<Item = f64>, bin_width: f64) -> Result<Vec<HistogramBin>> {
    if !(bin_width > 0.0 && bin_width <= 1.0) {
        return Err(Error::InvalidParameter(format!("bin width {bin_width} outside (0, 1]")));
    }
    let n_bins = libm::ceil(1.0 / bin_width - 1e-9) as usize;
    let mut bins: Vec<HistogramBin> = (0..n_bins)
        .map(|i| HistogramBin { lo: i as f64 * bin_width, hi: ((i + 1) as f64 * bin_width).min(1.0), count: 0 })
        .collect();
    for v in values {
        let idx = ((v / bin_width) as usize).min(n_bins - 1);
        bins[idx].count += 1;
    }
    Ok(bins)
}

pub fn aggregate_masks(masks: &[NodeMask], mut cells: Vec<SweepCell>, bin_width: f64) -> Result<MaskSweep> {
    sort_cells(&mut cells);
    let rows: Vec<MaskRow> = masks
        .iter()
        .map(|&mask| {
            let (sum, n) = cells
                .iter()
                .filter(|c| c.mask == mask.bits())
                .fold((0.0, 0usize), |(s, n), c| (s + c.accuracy, n + 1));
            MaskRow { mask, mean_accuracy: if n > 0 { sum / n as f64 } else { f64::NAN }, n_splits: n }
        })
        .collect();
    let bins = histogram(rows.iter().map(|r| r.mean_accuracy), bin_width)?;
    Ok(MaskSweep { rows, bins, cells })
}

/// Per-mask mean accuracy over all splits at one window length and filter.
pub fn sweep_node_masks(
    sets: &SetCollection,
    splits: &[SplitPlan],
    moment_l: usize,
    filter: FilterSpec,
    knn: KnnParams,
    masks: Option<&[NodeMask]>,
    bin_width: f64,
) -> Result<MaskSweep> {
    let masks = masks_or_all(sets.n_nodes(), masks)?;
    let jobs = plan_jobs(splits, &[moment_l], &masks)?;
    let mut cells = Vec::new();
    for job in &jobs {
        cells.extend(run_job(sets, job, knn, &[filter])?);
    }
    aggregate_masks(&masks, cells, bin_width)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::accuracy;
    use crate::dataset::enumerate_splits;
    use crate::synth::Scenario;

    fn collection(n: usize, seed: u64) -> SetCollection {
        let scen = Scenario::default();
        let sets = (0..n).map(|i| scen.generate(&format!("s{i}"), seed * 100 + i as u64).unwrap()).collect();
        SetCollection::new(sets).unwrap()
    }

    fn first_split(sets: &SetCollection, n_train: usize) -> SplitPlan {
        enumerate_splits(&sets.ids(), n_train).unwrap().remove(0)
    }

    #[test]
    fn bypass_equals_bare_classifier() {
        let sets = collection(3, 1);
        let split = first_split(&sets, 2);
        let mask = NodeMask::full(sets.n_nodes()).unwrap();
        let report = run_pipeline(&sets, &split, &PipelineConfig::new(mask, 1, FilterSpec::None)).unwrap();

        let train: Vec<&MeasurementSet> = split.train_ids.iter().map(|id| sets.get(id).unwrap()).collect();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for s in &train {
            rows.extend(crate::features::raw_features(s.frames()).into_iter().map(|f| f.values));
            labels.extend(s.labels().unwrap());
        }
        let knn = Knn::fit(&TrainingSet::new(rows, labels).unwrap(), KnnParams::default()).unwrap();
        let val = sets.get(&split.val_id).unwrap();
        let pred = knn.predict_all(&crate::features::raw_features(val.frames())).unwrap();
        assert_eq!(report.accuracy, accuracy(&val.labels().unwrap(), &pred).unwrap());
        assert!(report.predictions.iter().all(|r| r.y_hat == r.z_hat));
        assert_eq!(report.confusion.accuracy().unwrap(), report.accuracy);
    }

    #[test]
    fn validation_overlapping_training_is_rejected() {
        let sets = collection(2, 2);
        let split = SplitPlan { train_ids: vec!["s0".into()], val_id: "s0".into() };
        let cfg = PipelineConfig::new(NodeMask::full(10).unwrap(), 1, FilterSpec::None);
        assert!(matches!(run_pipeline(&sets, &split, &cfg), Err(Error::InvalidSplit(_))));
        let missing = SplitPlan::new(vec!["s0".into()], "nope").unwrap();
        assert!(matches!(run_pipeline(&sets, &missing, &cfg), Err(Error::MissingSet(_))));
    }

    #[test]
    fn validation_labels_do_not_reach_training() {
        let sets = collection(3, 3);
        let split = first_split(&sets, 2);
        let cfg = PipelineConfig::new(NodeMask::full(10).unwrap(), 2, FilterSpec::hmm());
        let (_, trained) = run_pipeline_trained(&sets, &split, &cfg).unwrap();

        let mutated: Vec<MeasurementSet> = sets
            .iter()
            .map(|s| {
                if s.id() != split.val_id {
                    return s.clone();
                }
                let frames = s
                    .frames()
                    .iter()
                    .map(|f| crate::dataset::RssiFrame { label: Some((f.label.unwrap() + 1) % 3), ..f.clone() })
                    .collect();
                MeasurementSet::new(s.id(), s.node_labels().to_vec(), frames).unwrap()
            })
            .collect();
        let mutated = SetCollection::new(mutated).unwrap();
        let (_, trained2) = run_pipeline_trained(&mutated, &split, &cfg).unwrap();
        assert_eq!(trained, trained2);
    }

    #[test]
    fn singleton_sweep_equals_pipeline() {
        let sets = collection(3, 4);
        let split = first_split(&sets, 2);
        let mask = NodeMask::new(0b1000010001, 10).unwrap();
        let table = sweep_l(&sets, core::slice::from_ref(&split), &[1], &[mask], &[FilterSpec::None], KnnParams::default()).unwrap();
        let report = run_pipeline(&sets, &split, &PipelineConfig::new(mask, 1, FilterSpec::None)).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].mean_accuracy, report.accuracy);
    }

    #[test]
    fn sweep_means_match_individual_reports() {
        let sets = collection(3, 5);
        let splits = enumerate_splits(&sets.ids(), 2).unwrap();
        let masks = [NodeMask::new(0b0000010001, 10).unwrap(), NodeMask::full(10).unwrap()];
        let filters = [FilterSpec::None, FilterSpec::Median { m: 3 }, FilterSpec::hmm()];
        let table = sweep_l(&sets, &splits, &[1, 2], &masks, &filters, KnnParams::default()).unwrap();
        assert_eq!(table.rows.len(), 6);
        for row in &table.rows {
            let mut accs = Vec::new();
            for &mask in &masks {
                for split in &splits {
                    let cfg = PipelineConfig::new(mask, row.moment_l, row.filter);
                    accs.push(run_pipeline(&sets, split, &cfg).unwrap().accuracy);
                }
            }
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            assert!((row.mean_accuracy - mean).abs() < 1e-12, "{row:?} vs {mean}");
            assert_eq!(row.n_cells, accs.len());
        }
    }

    #[test]
    fn mask_sweep_rows_and_guard() {
        let scen = Scenario::default();
        let mut sets = Vec::new();
        for i in 0..3 {
            let s = scen.generate(&format!("s{i}"), 60 + i).unwrap();
            let mask = NodeMask::from_names(&["I-E", "I-DR", "O-M", "O-DR"], s.node_labels()).unwrap();
            sets.push(select_nodes(&s, mask).unwrap());
        }
        let sets = SetCollection::new(sets).unwrap();
        let splits = enumerate_splits(&sets.ids(), 2).unwrap();
        let sweep = sweep_node_masks(&sets, &splits, 2, FilterSpec::None, KnnParams::default(), None, 0.05).unwrap();
        assert_eq!(sweep.rows.len(), 15);
        assert_eq!(sweep.rows.iter().filter(|r| r.mask.bits() == 0b1111).count(), 1);
        assert_eq!(sweep.bins.len(), 20);
        assert_eq!(sweep.bins.iter().map(|b| b.count).sum::<usize>(), 15);
        assert!(sweep.rows.iter().all(|r| r.n_splits == 3));
        assert!(masks_or_all(17, None).is_err());
        assert_eq!(masks_or_all(17, Some(&[NodeMask::full(17).unwrap()])).unwrap().len(), 1);
    }

    #[test]
    fn histogram_edges() {
        let bins = histogram([0.0, 0.5, 0.999, 1.0], 0.1).unwrap();
        assert_eq!(bins.len(), 10);
        assert_eq!(bins[0].count, 1);
        assert_eq!(bins[5].count, 1);
        assert_eq!(bins[9].count, 2);
        assert!(histogram([0.5], 0.0).is_err());
    }

    #[test]
    fn reports_are_reproducible() {
        let sets = collection(3, 7);
        let split = first_split(&sets, 2);
        let cfg = PipelineConfig::new(NodeMask::full(10).unwrap(), 2, FilterSpec::hmm());
        assert_eq!(run_pipeline(&sets, &split, &cfg).unwrap(), run_pipeline(&sets, &split, &cfg).unwrap());
    }

    #[test]
    fn collection_rejects_mixed_layouts() {
        let a = Scenario::default().generate("a", 1).unwrap();
        let b = select_nodes(&Scenario::default().generate("b", 2).unwrap(), NodeMask::new(0b11, 10).unwrap()).unwrap();
        assert!(matches!(SetCollection::new(vec![a.clone(), b]), Err(Error::NodeLabelsDiffer(_))));
        assert!(SetCollection::new(vec![a.clone(), a]).is_err());
    }

    #[test]
    fn unlabeled_validation_frames_are_not_scored() {
        let sets = collection(2, 8);
        let val = sets.get("s1").unwrap();
        let y: Vec<usize> = vec![0; val.len()];
        let mut frames = val.frames().to_vec();
        frames.iter_mut().for_each(|f| f.label = None);
        let unlabeled = MeasurementSet::new("u", val.node_labels().to_vec(), frames).unwrap();
        assert_eq!(score(&unlabeled, &y, &y), Err(Error::NoScoredFrames));
    }
}
