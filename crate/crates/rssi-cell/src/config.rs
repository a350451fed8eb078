//! Command configurations. Each is read from JSON, then overridden by flags;
//! the effective value is what the run manifest records.

use std::path::Path;

use rssi_cell_core::classify::KnnParams;
use rssi_cell_core::dataset::{enumerate_splits, NodeMask, SplitPlan};
use rssi_cell_core::eval::FilterSpec;
use rssi_cell_core::postprocess::{Hmm, DEFAULT_SMOOTHING};
use rssi_cell_core::synth::Scenario;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};

use crate::{models, Error, Result};

/// Parses `none`, `hmm`, `hmm-adjacent`, `median(M)` or `median:M`.
pub fn parse_filter(s: &str) -> Result<FilterSpec> {
    let s = s.trim();
    match s {
        "none" => return Ok(FilterSpec::None),
        "hmm" => return Ok(FilterSpec::hmm()),
        "hmm-adjacent" => return Ok(FilterSpec::Hmm { smoothing: DEFAULT_SMOOTHING, forbid_skips: true }),
        _ => {}
    }
    let m = s
        .strip_prefix("median(")
        .and_then(|r| r.strip_suffix(')'))
        .or_else(|| s.strip_prefix("median:"))
        .and_then(|m| m.trim().parse::<usize>().ok());
    match m {
        Some(m) => Ok(FilterSpec::Median { m }),
        None => Err(Error::Usage(format!(
            "unknown filter {s:?}; expected none, hmm, hmm-adjacent or median(M)"
        ))),
    }
}

/// A filter given either by name or as a full object.
#[derive(Deserialize)]
#[serde(untagged)]
enum FilterField {
    Name(String),
    Spec(FilterSpec),
}

impl FilterField {
    fn resolve<E: serde::de::Error>(self) -> std::result::Result<FilterSpec, E> {
        match self {
            FilterField::Name(s) => parse_filter(&s).map_err(E::custom),
            FilterField::Spec(f) => Ok(f),
        }
    }
}

fn de_filter<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<FilterSpec, D::Error> {
    FilterField::deserialize(d)?.resolve()
}

fn de_filters<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<FilterSpec>, D::Error> {
    Vec::<FilterField>::deserialize(d)?.into_iter().map(FilterField::resolve).collect()
}

/// `evaluate`: one report per requested split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    /// Node names to use; all nodes when absent.
    pub nodes: Option<Vec<String>>,
    pub moment_l: usize,
    pub knn: KnnParams,
    #[serde(deserialize_with = "de_filter")]
    pub filter: FilterSpec,
    /// Training sets per split; defaults to `min(3, sets - 1)`.
    pub n_train: Option<usize>,
    /// Indices into the enumerated split list; all splits when absent.
    pub splits: Option<Vec<usize>>,
    pub seed: u64,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            nodes: None,
            moment_l: 2,
            knn: KnnParams::default(),
            filter: FilterSpec::hmm(),
            n_train: None,
            splits: None,
            seed: 0,
        }
    }
}

/// `sweep-l`: mean accuracy per (L, filter).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepLConfig {
    pub l_values: Vec<usize>,
    #[serde(deserialize_with = "de_filters")]
    pub filters: Vec<FilterSpec>,
    /// Node-name lists; every non-empty mask when absent.
    pub masks: Option<Vec<Vec<String>>>,
    pub n_train: Option<usize>,
    pub knn: KnnParams,
    pub seed: u64,
}

impl Default for SweepLConfig {
    fn default() -> Self {
        SweepLConfig {
            l_values: (1..=10).collect(),
            filters: vec![
                FilterSpec::None,
                FilterSpec::Median { m: 1 },
                FilterSpec::Median { m: 5 },
                FilterSpec::Median { m: 10 },
                FilterSpec::hmm(),
            ],
            masks: None,
            n_train: None,
            knn: KnnParams::default(),
            seed: 0,
        }
    }
}

impl SweepLConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l_values.is_empty() {
            return Err(Error::Usage("empty L list".into()));
        }
        if self.l_values.contains(&0) {
            return Err(Error::Usage("L values must be >= 1".into()));
        }
        if self.filters.is_empty() {
            return Err(Error::Usage("empty filter list".into()));
        }
        Ok(())
    }
}

/// `sweep-nodes`: mean accuracy per node mask plus a histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepNodesConfig {
    pub moment_l: usize,
    #[serde(deserialize_with = "de_filter")]
    pub filter: FilterSpec,
    pub bin_width: f64,
    pub masks: Option<Vec<Vec<String>>>,
    pub n_train: Option<usize>,
    pub knn: KnnParams,
    pub seed: u64,
}

impl Default for SweepNodesConfig {
    fn default() -> Self {
        SweepNodesConfig {
            moment_l: 2,
            filter: FilterSpec::None,
            bin_width: 0.01,
            masks: None,
            n_train: None,
            knn: KnnParams::default(),
            seed: 0,
        }
    }
}

/// `generate`: the scenario is embedded so the manifest alone reproduces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub scenario: Scenario,
    pub count: usize,
    pub seed: u64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig { scenario: Scenario::default(), count: 6, seed: 0 }
    }
}

/// `filter`: the second stage to re-apply to a predictions table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterMethod {
    Median { m: usize },
    Hmm { model: Hmm },
}

/// Reads a config file, or the defaults when no file is given.
pub fn load_or_default<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => models::read_json(p),
        None => Ok(T::default()),
    }
}

/// Resolves node names to a mask; unknown names list the valid ones.
pub fn resolve_mask(names: &[String], node_labels: &[String]) -> Result<NodeMask> {
    if names.is_empty() {
        return Err(Error::Usage("empty node list".into()));
    }
    NodeMask::from_names(names, node_labels).map_err(|e| match e {
        rssi_cell_core::Error::UnknownNode(name) => {
            Error::Usage(format!("unknown node {name:?}; valid names: {}", node_labels.join(", ")))
        }
        other => other.into(),
    })
}

pub fn resolve_masks(lists: Option<&[Vec<String>]>, node_labels: &[String]) -> Result<Option<Vec<NodeMask>>> {
    lists.map(|ls| ls.iter().map(|names| resolve_mask(names, node_labels)).collect()).transpose()
}

/// Enumerated splits, optionally restricted to `indices`; each keeps its
/// position in the full enumeration.
pub fn resolve_splits(ids: &[String], n_train: Option<usize>, indices: Option<&[usize]>) -> Result<Vec<(usize, SplitPlan)>> {
    if ids.len() < 2 {
        return Err(Error::Usage(format!("need at least 2 measurement sets, found {}", ids.len())));
    }
    let n_train = n_train.unwrap_or(3.min(ids.len() - 1));
    let all = enumerate_splits(ids, n_train)?;
    match indices {
        None => Ok(all.into_iter().enumerate().collect()),
        Some(idx) => {
            if idx.is_empty() {
                return Err(Error::Usage("empty split list".into()));
            }
            idx.iter()
                .map(|&i| {
                    all.get(i).cloned().map(|s| (i, s)).ok_or_else(|| {
                        Error::Usage(format!("split index {i} out of range (0..{})", all.len()))
                    })
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_names() {
        assert_eq!(parse_filter("none").unwrap(), FilterSpec::None);
        assert_eq!(parse_filter("median(5)").unwrap(), FilterSpec::Median { m: 5 });
        assert_eq!(parse_filter("median:0").unwrap(), FilterSpec::Median { m: 0 });
        assert_eq!(parse_filter("hmm").unwrap(), FilterSpec::hmm());
        assert!(matches!(parse_filter("hmm-adjacent").unwrap(), FilterSpec::Hmm { forbid_skips: true, .. }));
        assert!(parse_filter("median(-1)").is_err());
        assert!(parse_filter("kalman").is_err());
        for f in SweepLConfig::default().filters {
            assert_eq!(parse_filter(&f.name()).unwrap(), f);
        }
    }

    #[test]
    fn configs_accept_names_or_objects() {
        let c: EvaluateConfig = serde_json::from_str(r#"{"filter": "median(3)", "moment_l": 1}"#).unwrap();
        assert_eq!(c.filter, FilterSpec::Median { m: 3 });
        assert_eq!(c.knn.k, 5);
        let c: EvaluateConfig =
            serde_json::from_str(r#"{"filter": {"kind": "hmm", "smoothing": 0.01, "forbid_skips": true}}"#).unwrap();
        assert_eq!(c.filter, FilterSpec::Hmm { smoothing: 0.01, forbid_skips: true });
        let s: SweepLConfig = serde_json::from_str(r#"{"filters": ["none", {"kind": "median", "m": 2}]}"#).unwrap();
        assert_eq!(s.filters, [FilterSpec::None, FilterSpec::Median { m: 2 }]);
        assert!(serde_json::from_str::<EvaluateConfig>(r#"{"moment_L": 2}"#).is_err());
        let snap = serde_json::to_value(&c).unwrap();
        assert_eq!(serde_json::from_value::<EvaluateConfig>(snap).unwrap(), c);
    }

    #[test]
    fn empty_l_list_is_usage_error() {
        let s: SweepLConfig = serde_json::from_str(r#"{"l_values": []}"#).unwrap();
        assert_eq!(s.validate().unwrap_err().exit_code(), crate::ExitCode::Usage);
        assert!(SweepLConfig::default().validate().is_ok());
    }

    #[test]
    fn mask_resolution_lists_valid_names() {
        let labels: Vec<String> = ["I-E", "I-DR", "O-M"].iter().map(|s| s.to_string()).collect();
        let m = resolve_mask(&["O-M".into(), "I-E".into()], &labels).unwrap();
        assert_eq!(m.bits(), 0b101);
        let err = resolve_mask(&["X".into()], &labels).unwrap_err().to_string();
        assert!(err.contains("I-E, I-DR, O-M"), "{err}");
    }

    #[test]
    fn split_resolution() {
        let ids: Vec<String> = (0..6).map(|i| format!("s{i}")).collect();
        assert_eq!(resolve_splits(&ids, None, None).unwrap().len(), 60);
        let picked = resolve_splits(&ids, None, Some(&[59, 0])).unwrap();
        assert_eq!(picked[0].0, 59);
        assert!(resolve_splits(&ids, None, Some(&[60])).is_err());
        assert_eq!(resolve_splits(&ids[..2], None, None).unwrap().len(), 2);
        assert!(resolve_splits(&ids[..1], None, None).is_err());
    }
}
