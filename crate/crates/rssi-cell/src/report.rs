//! Plot-ready CSV tables and the JSON report documents.
//!
//! | file                       | header                                          |
//! |----------------------------|-------------------------------------------------|
//! | `predictions.csv`          | `t,truth,y_hat,z_hat,split,val_set`             |
//! | `accuracy_vs_L.csv`        | `L,filter,mean_accuracy,n_cells`                |
//! | `sweep_cells.csv`          | `L,filter,mask,split,accuracy`                  |
//! | `mask_histogram.csv`       | `mask,nodes,n_nodes,mean_accuracy,n_splits`     |
//! | `mask_histogram_bins.csv`  | `lo,hi,count`                                   |
//!
//! `truth` is empty for unlabeled frames. Masks are written as the decimal
//! bit pattern (bit i = column i) and, in `nodes`, as `;`-joined names.

use std::path::Path;

use rssi_cell_core::eval::{EvalReport, FilterSpec, MaskSweep, PredictionRow, SweepCell, SweepTable};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const PREDICTIONS_HEADER: &[&str] = &["t", "truth", "y_hat", "z_hat", "split", "val_set"];
pub const ACCURACY_VS_L_HEADER: &[&str] = &["L", "filter", "mean_accuracy", "n_cells"];
pub const SWEEP_CELLS_HEADER: &[&str] = &["L", "filter", "mask", "split", "accuracy"];
pub const MASK_HISTOGRAM_HEADER: &[&str] = &["mask", "nodes", "n_nodes", "mean_accuracy", "n_splits"];
pub const HISTOGRAM_BINS_HEADER: &[&str] = &["lo", "hi", "count"];

/// One row of `predictions.csv`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub t: u64,
    pub truth: Option<usize>,
    pub y_hat: usize,
    pub z_hat: usize,
    pub split: Option<usize>,
    pub val_set: Option<String>,
}

impl PredictionRecord {
    pub fn from_row(row: &PredictionRow, split: usize, val_set: &str) -> Self {
        PredictionRecord {
            t: row.t,
            truth: row.truth,
            y_hat: row.y_hat,
            z_hat: row.z_hat,
            split: Some(split),
            val_set: Some(val_set.to_string()),
        }
    }
}

fn table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let enc = |e: csv::Error| Error::Internal(format!("csv encode: {e}"));
    w.write_record(header).map_err(enc)?;
    for row in rows {
        w.write_record(&row).map_err(enc)?;
    }
    w.into_inner().map_err(|e| Error::Internal(format!("csv encode: {e}")))
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

pub fn predictions_csv(records: &[PredictionRecord]) -> Result<Vec<u8>> {
    table(
        PREDICTIONS_HEADER,
        records.iter().map(|r| {
            vec![r.t.to_string(), opt(&r.truth), r.y_hat.to_string(), r.z_hat.to_string(), opt(&r.split), opt(&r.val_set)]
        }),
    )
}

/// Flattens evaluation reports, split index = position in `reports`'s split list.
pub fn prediction_records(reports: &[(usize, EvalReport)]) -> Vec<PredictionRecord> {
    reports
        .iter()
        .flat_map(|(idx, r)| r.predictions.iter().map(|p| PredictionRecord::from_row(p, *idx, &r.split.val_id)))
        .collect()
}

/// Reads a predictions table. `t` and `y_hat` are required; `truth`,
/// `z_hat`, `split` and `val_set` may be absent or empty.
pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::data(path, e.to_string()))?;
    let headers = rdr.headers().map_err(|e| Error::data(path, e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(t_col), Some(y_col)) = (col("t"), col("y_hat")) else {
        return Err(Error::data(path, "predictions need `t` and `y_hat` columns"));
    };
    let (truth_col, z_col, split_col, set_col) = (col("truth"), col("z_hat"), col("split"), col("val_set"));
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::data(path, format!("malformed row {row}: {e}")))?;
        let field = |c: Option<usize>| c.and_then(|c| rec.get(c)).map(str::trim).filter(|s| !s.is_empty());
        let num = |c: Option<usize>, what: &str| -> Result<Option<u64>> {
            field(c)
                .map(|s| s.parse::<u64>().map_err(|_| Error::data(path, format!("malformed row {row}: bad {what} {s:?}"))))
                .transpose()
        };
        let t = num(Some(t_col), "t")?.ok_or_else(|| Error::data(path, format!("malformed row {row}: missing t")))?;
        let y_hat = num(Some(y_col), "y_hat")?
            .ok_or_else(|| Error::data(path, format!("malformed row {row}: missing y_hat")))? as usize;
        out.push(PredictionRecord {
            t,
            truth: num(truth_col, "truth")?.map(|v| v as usize),
            y_hat,
            z_hat: num(z_col, "z_hat")?.map_or(y_hat, |v| v as usize),
            split: num(split_col, "split")?.map(|v| v as usize),
            val_set: field(set_col).map(str::to_string),
        });
    }
    Ok(out)
}

pub fn accuracy_vs_l_csv(table_: &SweepTable) -> Result<Vec<u8>> {
    table(
        ACCURACY_VS_L_HEADER,
        table_.rows.iter().map(|r| {
            vec![r.moment_l.to_string(), r.filter.name(), r.mean_accuracy.to_string(), r.n_cells.to_string()]
        }),
    )
}

pub fn sweep_cells_csv(cells: &[SweepCell], filters: &[FilterSpec]) -> Result<Vec<u8>> {
    table(
        SWEEP_CELLS_HEADER,
        cells.iter().map(|c| {
            vec![
                c.moment_l.to_string(),
                filters.get(c.filter).map(FilterSpec::name).unwrap_or_default(),
                c.mask.to_string(),
                c.split.to_string(),
                c.accuracy.to_string(),
            ]
        }),
    )
}

pub fn mask_histogram_csv(sweep: &MaskSweep, node_labels: &[String]) -> Result<Vec<u8>> {
    table(
        MASK_HISTOGRAM_HEADER,
        sweep.rows.iter().map(|r| {
            vec![
                r.mask.bits().to_string(),
                r.mask.names(node_labels).collect::<Vec<_>>().join(";"),
                r.mask.count().to_string(),
                r.mean_accuracy.to_string(),
                r.n_splits.to_string(),
            ]
        }),
    )
}

pub fn histogram_bins_csv(sweep: &MaskSweep) -> Result<Vec<u8>> {
    table(
        HISTOGRAM_BINS_HEADER,
        sweep.bins.iter().map(|b| vec![b.lo.to_string(), b.hi.to_string(), b.count.to_string()]),
    )
}

/// Checks that a CSV file starts with exactly `expected` as its header.
pub fn check_header(path: &Path, expected: &[&str]) -> Result<()> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::data(path, e.to_string()))?;
    let found = rdr.headers().map_err(|e| Error::data(path, e.to_string()))?;
    if found.iter().ne(expected.iter().copied()) {
        return Err(Error::data(
            path,
            format!("header `{}` does not match `{}`", found.iter().collect::<Vec<_>>().join(","), expected.join(",")),
        ));
    }
    Ok(())
}
