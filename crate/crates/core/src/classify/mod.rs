//! Point classifier stage.
//!
//! [`Classifier`] is the interface the pipeline trains and queries; [`Knn`] is
//! the reference implementation. Labels are state indices `0..n`.

mod knn;
mod metrics;
mod standardize;

use alloc::vec::Vec;

pub use knn::{Knn, KnnParams};
pub use metrics::{accuracy, confusion, ConfusionMatrix};
pub use standardize::Standardizer;

use crate::features::FeatureVector;
use crate::{Error, Result};

/// Feature rows with their labels; all rows share one width.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
}

impl TrainingSet {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if features.len() != labels.len() {
            return Err(Error::LengthMismatch { left: features.len(), right: labels.len() });
        }
        let width = features[0].len();
        if let Some(row) = features.iter().find(|r| r.len() != width) {
            return Err(Error::FeatureWidth { expected: width, found: row.len() });
        }
        if let Some(row) = features.iter().find(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidParameter(alloc::format!("non-finite feature in {row:?}")));
        }
        Ok(TrainingSet { features, labels })
    }

    pub fn from_vectors(features: &[FeatureVector], labels: Vec<usize>) -> Result<Self> {
        TrainingSet::new(features.iter().map(|f| f.values.clone()).collect(), labels)
    }

    pub fn width(&self) -> usize {
        self.features[0].len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Number of distinct label values present.
    pub fn distinct_labels(&self) -> usize {
        let mut seen: Vec<usize> = self.labels.clone();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }
}

/// A fitted point classifier.
pub trait Classifier {
    /// Input width the classifier was trained on.
    fn width(&self) -> usize;

    fn predict(&self, x: &[f64]) -> Result<usize>;

    fn predict_all(&self, xs: &[FeatureVector]) -> Result<Vec<usize>> {
        xs.iter().map(|x| self.predict(&x.values)).collect()
    }
}
