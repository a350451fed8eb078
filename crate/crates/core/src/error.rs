use alloc::string::String;

use crate::dataset::Dbm;

pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong in the core pipeline.
///
/// Frame positions (`frame`) are zero-based indices into the set's frame list;
/// loaders translate them into file row numbers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("measurement set has no frames")]
    EmptySet,
    #[error("rssi out of range at frame {frame}: {value} dBm")]
    RssiOutOfRange { frame: usize, value: Dbm },
    #[error("frame {frame} has {found} rssi values, expected {expected}")]
    FrameWidth {
        frame: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-contiguous superframe index at frame {frame}: expected {expected}, found {found}")]
    NonContiguous { frame: usize, expected: u64, found: u64 },
    #[error("unknown label {label} at frame {frame}")]
    InvalidLabel { frame: usize, label: u8 },
    #[error("frame {frame} is unlabeled")]
    Unlabeled { frame: usize },
    #[error("duplicate node name {0:?}")]
    DuplicateNode(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("node mask must select at least one node")]
    EmptyMask,
    #[error("node mask {bits:#b} does not fit {n_nodes} nodes")]
    MaskOutOfRange { bits: u64, n_nodes: usize },
    #[error("{n_nodes} nodes cannot be enumerated (limit {max})")]
    TooManyNodes { n_nodes: usize, max: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("unknown measurement set {0:?}")]
    MissingSet(String),
    #[error("measurement set {0:?} has node labels that differ from the collection")]
    NodeLabelsDiffer(String),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("feature width {found} does not match expected {expected}")]
    FeatureWidth { expected: usize, found: usize },
    #[error("sequence lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("sequence is empty")]
    EmptySequence,
    #[error("label {label} out of range for {n} states")]
    LabelOutOfRange { label: usize, n: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("observation impossible under model at step {step}")]
    ImpossibleObservation { step: usize },
    #[error("no labeled frames to score")]
    NoScoredFrames,
}
