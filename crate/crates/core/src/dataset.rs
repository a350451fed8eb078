//! Labeled RSSI traces: frames, measurement sets, node masks and split plans.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::{Error, Result, N_CELLS};

/// A received signal strength in tenths of a dBm.
///
/// Transceivers report either whole dBm or a single decimal, so a fixed-point
/// representation keeps file round trips exact and moment sums integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct Dbm(i16);

impl Dbm {
    /// Sentinel recorded when a sniffer did not receive the packet.
    pub const MISSING: Dbm = Dbm(-1000);
    pub const MIN: Dbm = Dbm(-1000);
    pub const MAX: Dbm = Dbm(0);

    pub const fn from_tenths(tenths: i16) -> Self {
        Dbm(tenths)
    }

    pub const fn from_whole(dbm: i16) -> Self {
        Dbm(dbm * 10)
    }

    /// Rounds to the nearest tenth. Values outside the `i16` range saturate.
    pub fn from_f64(dbm: f64) -> Self {
        let tenths = libm::round(dbm * 10.0);
        Dbm(tenths.clamp(i16::MIN as f64, i16::MAX as f64) as i16)
    }

    pub const fn tenths(self) -> i16 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 10.0
    }

    pub fn is_missing(self) -> bool {
        self == Self::MISSING
    }

    pub fn in_range(self) -> bool {
        (Self::MIN..=Self::MAX).contains(&self)
    }
}

impl fmt::Display for Dbm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        if abs % 10 == 0 {
            write!(f, "{}{}", sign, abs / 10)
        } else {
            write!(f, "{}{}.{}", sign, abs / 10, abs % 10)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseDbmError(String);

impl fmt::Display for ParseDbmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid dBm value {:?}", self.0)
    }
}

impl core::error::Error for ParseDbmError {}

impl FromStr for Dbm {
    type Err = ParseDbmError;

    /// Accepts an integer or a number with exactly one decimal digit.
    fn from_str(s: &str) -> core::result::Result<Self, Self::Err> {
        let err = || ParseDbmError(s.to_string());
        let s = s.trim();
        let (negative, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s.strip_prefix('+').unwrap_or(s)),
        };
        let (whole, frac) = match body.split_once('.') {
            Some((w, f)) => (w, Some(f)),
            None => (body, None),
        };
        if whole.is_empty() || !whole.bytes().all(|b| b.is_ascii_digit()) {
            return Err(err());
        }
        let whole: i32 = whole.parse().map_err(|_| err())?;
        let frac = match frac {
            None => 0,
            Some(f) if f.len() == 1 && f.as_bytes()[0].is_ascii_digit() => {
                i32::from(f.as_bytes()[0] - b'0')
            }
            Some(_) => return Err(err()),
        };
        let tenths = whole * 10 + frac;
        let tenths = if negative { -tenths } else { tenths };
        i16::try_from(tenths).map(Dbm).map_err(|_| err())
    }
}

/// One superframe: the synchronized RSSI vector across all sniffer nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RssiFrame {
    /// Superframe index (100 ms spacing).
    pub t: u64,
    pub rssi: Vec<Dbm>,
    /// Cell label: 0 outside, 1 inside, 2 on the test position.
    pub label: Option<u8>,
}

impl RssiFrame {
    pub fn new(t: u64, rssi: Vec<Dbm>, label: Option<u8>) -> Self {
        RssiFrame { t, rssi, label }
    }
}

/// A contiguous recording session; never split between training and validation.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MeasurementSet {
    id: String,
    node_labels: Vec<String>,
    frames: Vec<RssiFrame>,
}

impl MeasurementSet {
    /// Validates every invariant: non-empty, unit-step `t`, uniform width,
    /// RSSI within [-100, 0] dBm, labels below [`N_CELLS`], unique node names.
    pub fn new(id: impl Into<String>, node_labels: Vec<String>, frames: Vec<RssiFrame>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptySet);
        }
        let mut seen = BTreeSet::new();
        for name in &node_labels {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateNode(name.clone()));
            }
        }
        let n = node_labels.len();
        let t0 = frames[0].t;
        for (i, frame) in frames.iter().enumerate() {
            let expected = t0 + i as u64;
            if frame.t != expected {
                return Err(Error::NonContiguous { frame: i, expected, found: frame.t });
            }
            if frame.rssi.len() != n {
                return Err(Error::FrameWidth { frame: i, expected: n, found: frame.rssi.len() });
            }
            if let Some(&value) = frame.rssi.iter().find(|v| !v.in_range()) {
                return Err(Error::RssiOutOfRange { frame: i, value });
            }
            if let Some(label) = frame.label {
                if usize::from(label) >= N_CELLS {
                    return Err(Error::InvalidLabel { frame: i, label });
                }
            }
        }
        Ok(MeasurementSet { id: id.into(), node_labels, frames })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn node_labels(&self) -> &[String] {
        &self.node_labels
    }

    pub fn n_nodes(&self) -> usize {
        self.node_labels.len()
    }

    pub fn frames(&self) -> &[RssiFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn is_labeled(&self) -> bool {
        self.frames.iter().all(|f| f.label.is_some())
    }

    /// Labels as state indices; fails on the first unlabeled frame.
    pub fn labels(&self) -> Result<Vec<usize>> {
        self.frames
            .iter()
            .enumerate()
            .map(|(i, f)| f.label.map(usize::from).ok_or(Error::Unlabeled { frame: i }))
            .collect()
    }

    /// Frames `range` as a new set with the same id and nodes.
    pub fn slice(&self, range: core::ops::Range<usize>) -> Result<Self> {
        let frames = self.frames.get(range).map(<[RssiFrame]>::to_vec).unwrap_or_default();
        MeasurementSet::new(self.id.clone(), self.node_labels.clone(), frames)
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn into_frames(self) -> Vec<RssiFrame> {
        self.frames
    }
}

/// Largest node count accepted by a [`NodeMask`].
pub const MAX_MASK_NODES: usize = 63;

/// A non-empty subset of the sniffer nodes; bit `i` selects column `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NodeMask {
    bits: u64,
    n_nodes: usize,
}

impl NodeMask {
    pub fn new(bits: u64, n_nodes: usize) -> Result<Self> {
        if n_nodes > MAX_MASK_NODES {
            return Err(Error::TooManyNodes { n_nodes, max: MAX_MASK_NODES });
        }
        if bits == 0 {
            return Err(Error::EmptyMask);
        }
        if bits >> n_nodes != 0 {
            return Err(Error::MaskOutOfRange { bits, n_nodes });
        }
        Ok(NodeMask { bits, n_nodes })
    }

    pub fn full(n_nodes: usize) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::EmptyMask);
        }
        if n_nodes > MAX_MASK_NODES {
            return Err(Error::TooManyNodes { n_nodes, max: MAX_MASK_NODES });
        }
        NodeMask::new((1u64 << n_nodes) - 1, n_nodes)
    }

    /// Resolves node names against the set's column order.
    pub fn from_names<S: AsRef<str>>(names: &[S], node_labels: &[String]) -> Result<Self> {
        let mut bits = 0u64;
        for name in names {
            let name = name.as_ref();
            let idx = node_labels
                .iter()
                .position(|l| l == name)
                .ok_or_else(|| Error::UnknownNode(name.to_string()))?;
            bits |= 1 << idx;
        }
        NodeMask::new(bits, node_labels.len())
    }

    pub fn bits(self) -> u64 {
        self.bits
    }

    pub fn n_nodes(self) -> usize {
        self.n_nodes
    }

    pub fn count(self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn contains(self, idx: usize) -> bool {
        idx < self.n_nodes && self.bits & (1 << idx) != 0
    }

    /// Selected column indices in ascending order.
    pub fn indices(self) -> impl Iterator<Item = usize> {
        (0..self.n_nodes).filter(move |&i| self.bits & (1 << i) != 0)
    }

    pub fn names<'a>(self, node_labels: &'a [String]) -> impl Iterator<Item = &'a str> + 'a {
        self.indices().filter_map(move |i| node_labels.get(i).map(String::as_str))
    }
}

/// Projects a set onto the masked columns, keeping column order.
pub fn select_nodes(set: &MeasurementSet, mask: NodeMask) -> Result<MeasurementSet> {
    if mask.n_nodes() != set.n_nodes() {
        return Err(Error::MaskOutOfRange { bits: mask.bits(), n_nodes: set.n_nodes() });
    }
    let cols: Vec<usize> = mask.indices().collect();
    let node_labels = cols.iter().map(|&c| set.node_labels[c].clone()).collect();
    let frames = set
        .frames
        .iter()
        .map(|f| RssiFrame {
            t: f.t,
            rssi: cols.iter().map(|&c| f.rssi[c]).collect(),
            label: f.label,
        })
        .collect();
    Ok(MeasurementSet { id: set.id.clone(), node_labels, frames })
}

/// Every non-empty mask over `n_nodes` nodes, in ascending numeric order.
pub fn enumerate_node_masks(n_nodes: usize) -> Result<Vec<NodeMask>> {
    let full = NodeMask::full(n_nodes)?;
    Ok((1..=full.bits()).map(|bits| NodeMask { bits, n_nodes }).collect())
}

/// Whole measurement sets assigned to training and validation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplitPlan {
    pub train_ids: Vec<String>,
    pub val_id: String,
}

impl SplitPlan {
    pub fn new(train_ids: Vec<String>, val_id: impl Into<String>) -> Result<Self> {
        let val_id = val_id.into();
        if train_ids.is_empty() {
            return Err(Error::InvalidSplit("no training sets".into()));
        }
        let mut seen = BTreeSet::new();
        for id in &train_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::InvalidSplit(format!("training set {id:?} listed twice")));
            }
        }
        if seen.contains(val_id.as_str()) {
            return Err(Error::InvalidSplit(format!(
                "validation set {val_id:?} is also a training set"
            )));
        }
        Ok(SplitPlan { train_ids, val_id })
    }

    /// Re-checks the invariants, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        SplitPlan::new(self.train_ids.clone(), self.val_id.clone()).map(|_| ())
    }
}

/// All plans with `n_train` training sets and one of the remaining sets for
/// validation. Training combinations are enumerated in lexicographic index
/// order, validation sets ascending within each combination.
pub fn enumerate_splits<S: AsRef<str>>(set_ids: &[S], n_train: usize) -> Result<Vec<SplitPlan>> {
    let n = set_ids.len();
    if n_train == 0 || n_train >= n {
        return Err(Error::InvalidSplit(format!(
            "need 1 <= n_train < {n} sets, got n_train = {n_train}"
        )));
    }
    let mut seen = BTreeSet::new();
    for id in set_ids {
        if !seen.insert(id.as_ref()) {
            return Err(Error::InvalidSplit(format!("duplicate set id {:?}", id.as_ref())));
        }
    }
    let mut plans = Vec::new();
    let mut combo: Vec<usize> = (0..n_train).collect();
    loop {
        let train_ids: Vec<String> = combo.iter().map(|&i| set_ids[i].as_ref().to_string()).collect();
        for v in (0..n).filter(|v| !combo.contains(v)) {
            plans.push(SplitPlan {
                train_ids: train_ids.clone(),
                val_id: set_ids[v].as_ref().to_string(),
            });
        }
        // advance to the next combination
        let Some(pos) = (0..n_train).rev().find(|&i| combo[i] != i + n - n_train) else {
            break;
        };
        combo[pos] += 1;
        for j in pos + 1..n_train {
            combo[j] = combo[j - 1] + 1;
        }
    }
    Ok(plans)
}
