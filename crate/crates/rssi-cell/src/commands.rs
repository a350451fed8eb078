//! The subcommands as library functions. Each writes its outputs plus a
//! [`RunManifest`] into an output directory and returns a one-line summary.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rssi_cell_core::dataset::{MeasurementSet, NodeMask};
use rssi_cell_core::eval::{masks_or_all, run_pipeline_trained, EvalReport, FittedFilter, PipelineConfig, SetCollection};
use serde::Serialize;
use serde_json::json;

use crate::config::{
    resolve_mask, resolve_masks, resolve_splits, EvaluateConfig, FilterMethod, GenerateConfig, SweepLConfig,
    SweepNodesConfig,
};
use crate::manifest::{OutputDir, RunManifest};
use crate::report::{self, PredictionRecord};
use crate::{csv_io, models, sweep, Error, Result};

pub const GENERATE: &str = "generate";
pub const EVALUATE: &str = "evaluate";
pub const SWEEP_L: &str = "sweep-l";
pub const SWEEP_NODES: &str = "sweep-nodes";
pub const FILTER: &str = "filter";
pub const IMPORT: &str = "import";

#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: String,
    pub manifest: RunManifest,
}

fn snapshot<T: Serialize>(cfg: &T) -> Result<serde_json::Value> {
    serde_json::to_value(cfg).map_err(|e| Error::Internal(format!("config snapshot: {e}")))
}

fn new_manifest<T: Serialize>(command: &str, cfg: &T, seed: u64) -> Result<RunManifest> {
    Ok(RunManifest::new(command, snapshot(cfg)?, seed))
}

/// Loads every set in `dir` and records each file as a manifest input.
pub fn load_sets(dir: &Path, manifest: &mut RunManifest) -> Result<SetCollection> {
    let files = csv_io::csv_files(dir)?;
    if files.is_empty() {
        return Err(Error::data(dir, "no .csv measurement sets found"));
    }
    let mut sets = Vec::with_capacity(files.len());
    for f in &files {
        sets.push(csv_io::load_set(f)?);
        manifest.add_input(f)?;
    }
    manifest.data_dir = Some(dir.to_string_lossy().into_owned());
    SetCollection::new(sets).map_err(|e| Error::data(dir, e.to_string()))
}

pub fn generate(cfg: &GenerateConfig, out: &Path) -> Result<Outcome> {
    if cfg.count == 0 {
        return Err(Error::Usage("count must be >= 1".into()));
    }
    cfg.scenario.validate().map_err(|e| Error::Usage(format!("invalid scenario: {e}")))?;
    let sets = cfg.scenario.generate_sets(cfg.count, cfg.seed)?;
    let mut dir = OutputDir::create(out)?;
    for set in &sets {
        let mut buf = Vec::new();
        csv_io::write_set(set, &mut buf)?;
        dir.write(&format!("{}.csv", set.id()), &buf)?;
    }
    let frames: usize = sets.iter().map(MeasurementSet::len).sum();
    let manifest = dir.finish(new_manifest(GENERATE, cfg, cfg.seed)?)?;
    Ok(Outcome {
        summary: format!("wrote {} sets ({frames} frames) to {}", sets.len(), out.display()),
        manifest,
    })
}

fn node_mask(nodes: Option<&[String]>, sets: &SetCollection) -> Result<NodeMask> {
    match nodes {
        Some(names) => resolve_mask(names, sets.node_labels()),
        None => Ok(NodeMask::full(sets.n_nodes())?),
    }
}

pub fn evaluate(data_dir: &Path, cfg: &EvaluateConfig, out: &Path, threads: Option<usize>) -> Result<Outcome> {
    let mut manifest = new_manifest(EVALUATE, cfg, cfg.seed)?;
    let sets = load_sets(data_dir, &mut manifest)?;
    let mask = node_mask(cfg.nodes.as_deref(), &sets)?;
    let splits = resolve_splits(&sets.ids(), cfg.n_train, cfg.splits.as_deref())?;
    let pc = PipelineConfig { node_mask: mask, moment_l: cfg.moment_l, knn: cfg.knn, filter: cfg.filter, seed: cfg.seed };
    pc.validate().map_err(|e| Error::Usage(e.to_string()))?;

    let runs = sweep::with_threads(threads, || {
        splits
            .par_iter()
            .map(|(idx, split)| run_pipeline_trained(&sets, split, &pc).map(|(r, p)| (*idx, r, p.filter)))
            .collect::<rssi_cell_core::Result<Vec<_>>>()
    })??;

    let mut dir = OutputDir::create(out)?;
    let mut reports: Vec<(usize, EvalReport)> = Vec::with_capacity(runs.len());
    for (idx, report, filter) in runs {
        if let FittedFilter::Hmm(hmm) = &filter {
            dir.write(&format!("hmm/split-{idx:03}.json"), &models::to_json_bytes(hmm)?)?;
        }
        reports.push((idx, report));
    }
    let mean = reports.iter().map(|(_, r)| r.accuracy).sum::<f64>() / reports.len() as f64;
    let nodes: Vec<&str> = mask.names(sets.node_labels()).collect();
    let doc = json!({
        "summary": {
            "mean_accuracy": mean,
            "n_splits": reports.len(),
            "moment_l": cfg.moment_l,
            "filter": cfg.filter.name(),
            "nodes": nodes,
        },
        "reports": reports.iter().map(|(idx, r)| json!({"split_index": idx, "report": r})).collect::<Vec<_>>(),
    });
    dir.write("report.json", &models::to_json_bytes(&doc)?)?;
    dir.write("predictions.csv", &report::predictions_csv(&report::prediction_records(&reports))?)?;
    let manifest = dir.finish(manifest)?;
    Ok(Outcome {
        summary: format!(
            "mean accuracy {mean} over {} split(s) (L={}, filter={}, nodes={})",
            reports.len(),
            cfg.moment_l,
            cfg.filter.name(),
            nodes.join(",")
        ),
        manifest,
    })
}

pub fn sweep_l(data_dir: &Path, cfg: &SweepLConfig, out: &Path, threads: Option<usize>) -> Result<Outcome> {
    cfg.validate()?;
    let mut manifest = new_manifest(SWEEP_L, cfg, cfg.seed)?;
    let sets = load_sets(data_dir, &mut manifest)?;
    let masks = masks_or_all(sets.n_nodes(), resolve_masks(cfg.masks.as_deref(), sets.node_labels())?.as_deref())?;
    let splits: Vec<_> = resolve_splits(&sets.ids(), cfg.n_train, None)?.into_iter().map(|(_, s)| s).collect();
    let table = sweep::sweep_l(&sets, &splits, &cfg.l_values, &masks, &cfg.filters, cfg.knn, threads)?;

    let mut dir = OutputDir::create(out)?;
    dir.write("accuracy_vs_L.csv", &report::accuracy_vs_l_csv(&table)?)?;
    dir.write("sweep_cells.csv", &report::sweep_cells_csv(&table.cells, &cfg.filters)?)?;
    let doc = json!({"n_masks": masks.len(), "n_splits": splits.len(), "rows": table.rows});
    dir.write("report.json", &models::to_json_bytes(&doc)?)?;
    let manifest = dir.finish(manifest)?;

    let best: Vec<String> = cfg
        .filters
        .iter()
        .filter_map(|f| {
            table
                .rows
                .iter()
                .filter(|r| &r.filter == f)
                .fold(None::<&rssi_cell_core::eval::SweepRow>, |b, r| match b {
                    Some(b) if b.mean_accuracy >= r.mean_accuracy => Some(b),
                    _ => Some(r),
                })
                .map(|r| format!("{} L={} ({:.4})", f.name(), r.moment_l, r.mean_accuracy))
        })
        .collect();
    Ok(Outcome {
        summary: format!(
            "{} masks x {} splits; best per filter: {}",
            masks.len(),
            splits.len(),
            best.join(", ")
        ),
        manifest,
    })
}

pub fn sweep_nodes(data_dir: &Path, cfg: &SweepNodesConfig, out: &Path, threads: Option<usize>) -> Result<Outcome> {
    let mut manifest = new_manifest(SWEEP_NODES, cfg, cfg.seed)?;
    if cfg.moment_l == 0 {
        return Err(Error::Usage("moment_l must be >= 1".into()));
    }
    let sets = load_sets(data_dir, &mut manifest)?;
    let masks = resolve_masks(cfg.masks.as_deref(), sets.node_labels())?;
    let splits: Vec<_> = resolve_splits(&sets.ids(), cfg.n_train, None)?.into_iter().map(|(_, s)| s).collect();
    let result = sweep::sweep_node_masks(
        &sets,
        &splits,
        cfg.moment_l,
        cfg.filter,
        cfg.knn,
        masks.as_deref(),
        cfg.bin_width,
        threads,
    )?;

    let mut dir = OutputDir::create(out)?;
    dir.write("mask_histogram.csv", &report::mask_histogram_csv(&result, sets.node_labels())?)?;
    dir.write("mask_histogram_bins.csv", &report::histogram_bins_csv(&result)?)?;
    let doc = json!({"n_splits": splits.len(), "rows": result.rows, "bins": result.bins});
    dir.write("report.json", &models::to_json_bytes(&doc)?)?;
    let manifest = dir.finish(manifest)?;

    let best = result.rows.iter().fold(None::<&rssi_cell_core::eval::MaskRow>, |b, r| match b {
        Some(b) if b.mean_accuracy >= r.mean_accuracy => Some(b),
        _ => Some(r),
    });
    let best = best
        .map(|r| format!("{} ({:.4})", r.mask.names(sets.node_labels()).collect::<Vec<_>>().join(","), r.mean_accuracy))
        .unwrap_or_default();
    Ok(Outcome { summary: format!("{} masks x {} splits; best mask {best}", result.rows.len(), splits.len()), manifest })
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterRun {
    pub input: PathBuf,
    pub method: FilterMethod,
}

fn accuracy_of(records: &[PredictionRecord], pick: impl Fn(&PredictionRecord) -> usize) -> Option<f64> {
    let scored: Vec<_> = records.iter().filter_map(|r| r.truth.map(|t| (t, pick(r)))).collect();
    (!scored.is_empty()).then(|| scored.iter().filter(|(t, p)| t == p).count() as f64 / scored.len() as f64)
}

/// Re-runs a second stage over the `y_hat` column of a predictions table.
/// Rows are filtered per contiguous (split, val_set) run, each from a fresh state.
pub fn filter(run: &FilterRun, out: &Path) -> Result<Outcome> {
    let mut records = report::read_predictions(&run.input)?;
    let fitted = match &run.method {
        FilterMethod::Median { m } => FittedFilter::Median(*m),
        FilterMethod::Hmm { model } => FittedFilter::Hmm(model.clone()),
    };
    let mut start = 0;
    while start < records.len() {
        let key = (records[start].split, records[start].val_set.clone());
        let end = records[start..]
            .iter()
            .position(|r| (r.split, r.val_set.clone()) != key)
            .map_or(records.len(), |p| start + p);
        let y_hat: Vec<usize> = records[start..end].iter().map(|r| r.y_hat).collect();
        let z_hat = fitted.apply(&y_hat).map_err(|e| Error::data(&run.input, e.to_string()))?;
        for (r, z) in records[start..end].iter_mut().zip(z_hat) {
            r.z_hat = z;
        }
        start = end;
    }
    let mut manifest = new_manifest(FILTER, run, 0)?;
    manifest.add_input(&run.input)?;
    let mut dir = OutputDir::create(out)?;
    dir.write("predictions.csv", &report::predictions_csv(&records)?)?;
    let manifest = dir.finish(manifest)?;
    let summary = match (accuracy_of(&records, |r| r.y_hat), accuracy_of(&records, |r| r.z_hat)) {
        (Some(before), Some(after)) => format!("filtered {} rows; accuracy {before} -> {after}", records.len()),
        _ => format!("filtered {} rows", records.len()),
    };
    Ok(Outcome { summary, manifest })
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImportRun {
    pub files: Vec<PathBuf>,
}

/// Converts wide RSSI dumps into canonical set files named after each input.
pub fn import(run: &ImportRun, out: &Path) -> Result<Outcome> {
    if run.files.is_empty() {
        return Err(Error::Usage("no input files".into()));
    }
    let mut manifest = new_manifest(IMPORT, run, 0)?;
    let mut dir = OutputDir::create(out)?;
    for f in &run.files {
        let id = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "set".into());
        let set = csv_io::import_wide_csv(f, &id)?;
        let mut buf = Vec::new();
        csv_io::write_set(&set, &mut buf)?;
        dir.write(&format!("{id}.csv"), &buf)?;
        manifest.add_input(f)?;
    }
    let manifest = dir.finish(manifest)?;
    Ok(Outcome { summary: format!("imported {} file(s) into {}", run.files.len(), out.display()), manifest })
}

/// Checks a dataset directory and describes each set.
pub fn validate(data_dir: &Path) -> Result<String> {
    let mut scratch = RunManifest::new("validate", serde_json::Value::Null, 0);
    let sets = load_sets(data_dir, &mut scratch)?;
    let mut lines = vec![format!("{} sets, nodes: {}", sets.len(), sets.node_labels().join(","))];
    for set in sets.iter() {
        let mut counts = [0usize; rssi_cell_core::N_CELLS];
        let mut unlabeled = 0;
        for f in set.frames() {
            match f.label {
                Some(l) => counts[usize::from(l)] += 1,
                None => unlabeled += 1,
            }
        }
        let missing = set.frames().iter().flat_map(|f| &f.rssi).filter(|d| d.is_missing()).count();
        lines.push(format!(
            "{}: {} frames, labels 0/1/2 = {}/{}/{}, unlabeled {unlabeled}, missing links {missing}",
            set.id(),
            set.len(),
            counts[0],
            counts[1],
            counts[2]
        ));
    }
    Ok(lines.join("\n"))
}

fn config_of<T: serde::de::DeserializeOwned>(m: &RunManifest, path: &Path) -> Result<T> {
    serde_json::from_value(m.config.clone()).map_err(|e| Error::config(path, format!("config snapshot: {e}")))
}

/// Re-runs a manifest into `out` and checks every output digest.
pub fn replay(manifest_path: &Path, out: &Path, threads: Option<usize>) -> Result<Outcome> {
    let m = RunManifest::load(manifest_path)?;
    let changed = m.changed_inputs()?;
    if !changed.is_empty() {
        return Err(Error::data(manifest_path, format!("inputs changed since the run: {}", changed.join(", "))));
    }
    let data_dir = || -> Result<PathBuf> {
        let dir = PathBuf::from(m.data_dir.as_deref().ok_or_else(|| Error::config(manifest_path, "no data_dir"))?);
        let now: Vec<String> = csv_io::csv_files(&dir)?.iter().map(|p| p.to_string_lossy().into_owned()).collect();
        let then: Vec<&String> = m.inputs.iter().map(|i| &i.path).collect();
        if now.iter().ne(then.iter().copied()) {
            return Err(Error::data(&dir, "dataset directory holds different files than recorded"));
        }
        Ok(dir)
    };
    let rerun = match m.command.as_str() {
        GENERATE => generate(&config_of(&m, manifest_path)?, out)?,
        EVALUATE => evaluate(&data_dir()?, &config_of(&m, manifest_path)?, out, threads)?,
        SWEEP_L => sweep_l(&data_dir()?, &config_of(&m, manifest_path)?, out, threads)?,
        SWEEP_NODES => sweep_nodes(&data_dir()?, &config_of(&m, manifest_path)?, out, threads)?,
        FILTER => filter(&config_of(&m, manifest_path)?, out)?,
        IMPORT => import(&config_of(&m, manifest_path)?, out)?,
        other => return Err(Error::config(manifest_path, format!("unknown command {other:?}"))),
    };
    if rerun.manifest.outputs != m.outputs {
        let differing: Vec<&str> = m
            .outputs
            .iter()
            .filter(|o| !rerun.manifest.outputs.contains(o))
            .map(|o| o.path.as_str())
            .collect();
        return Err(Error::Internal(format!("replay differs from the recorded run: {}", differing.join(", "))));
    }
    Ok(Outcome {
        summary: format!("{}: {} output(s) reproduced byte-identically", m.command, m.outputs.len()),
        manifest: rerun.manifest,
    })
}
