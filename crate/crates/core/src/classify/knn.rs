use alloc::vec;
use alloc::vec::Vec;

use super::{Classifier, Standardizer, TrainingSet};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct KnnParams {
    pub k: usize,
    /// Z-score features with training statistics before measuring distances.
    pub standardize: bool,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5, standardize: true }
    }
}

/// k-nearest-neighbors with Euclidean distance and majority vote.
///
/// Distance ties keep the earlier training row; vote ties go to the smallest
/// label. Both rules make prediction a pure function of the training data.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Knn {
    params: KnnParams,
    standardizer: Option<Standardizer>,
    width: usize,
    n_classes: usize,
    /// Training rows, standardized when enabled, row-major.
    points: Vec<f64>,
    labels: Vec<usize>,
}

impl Knn {
    pub fn fit(train: &TrainingSet, params: KnnParams) -> Result<Self> {
        if params.k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        if train.distinct_labels() == 1 {
            log::warn!("training set holds a single class; classifier is a constant predictor");
        }
        let width = train.width();
        let standardizer = params.standardize.then(|| Standardizer::fit(train.features()));
        let mut points = vec![0.0; train.len() * width];
        for (row, dst) in train.features().iter().zip(points.chunks_exact_mut(width.max(1))) {
            match &standardizer {
                Some(s) => s.transform_into(row, dst),
                None => dst.copy_from_slice(row),
            }
        }
        let n_classes = train.labels().iter().max().map_or(0, |m| m + 1);
        Ok(Knn {
            params,
            standardizer,
            width,
            n_classes,
            points,
            labels: train.labels().to_vec(),
        })
    }

    pub fn params(&self) -> KnnParams {
        self.params
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_points(&self) -> usize {
        self.labels.len()
    }

    /// Re-checks internal consistency, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        let ok = self.params.k >= 1
            && !self.labels.is_empty()
            && self.points.len() == self.labels.len() * self.width
            && self.labels.iter().all(|&l| l < self.n_classes)
            && self.standardizer.as_ref().map_or(true, |s| {
                s.width() == self.width && s.std().iter().all(|&v| v > 0.0)
            })
            && self.standardizer.is_some() == self.params.standardize;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidModel("inconsistent KNN model".into()))
        }
    }
}

impl Classifier for Knn {
    fn width(&self) -> usize {
        self.width
    }

    fn predict(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.width {
            return Err(Error::FeatureWidth { expected: self.width, found: x.len() });
        }
        let query = match &self.standardizer {
            Some(s) => s.transform(x),
            None => x.to_vec(),
        };
        let k = self.params.k.min(self.labels.len());
        // (squared distance, row) sorted ascending; strict comparison keeps earlier rows on ties
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        let rows = self.points.chunks_exact(self.width.max(1)).take(self.labels.len());
        for (i, row) in rows.enumerate() {
            let d: f64 = if self.width == 0 {
                0.0
            } else {
                row.iter().zip(&query).map(|(a, b)| (a - b) * (a - b)).sum()
            };
            if best.len() == k && d >= best[k - 1].0 {
                continue;
            }
            let pos = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(pos, (d, i));
            best.truncate(k);
        }
        let mut votes = vec![0usize; self.n_classes];
        for &(_, i) in &best {
            votes[self.labels[i]] += 1;
        }
        let mut winner = 0;
        for (label, &count) in votes.iter().enumerate() {
            if count > votes[winner] {
                winner = label;
            }
        }
        Ok(winner)
    }
}
