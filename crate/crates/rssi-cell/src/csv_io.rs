//! Measurement-set CSV files.
//!
//! Canonical format, one file per set, UTF-8:
//!
//! ```text
//! t,label,rssi_I-E,rssi_I-DR,...
//! 0,0,-71,-100
//! 1,,-70.5,-98
//! ```
//!
//! `t` is the superframe index (unit steps), `label` is 0/1/2 or empty, RSSI
//! values are whole dBm or one decimal, -100 marks a missing link. The set id
//! is the file stem. Row numbers in errors are file line numbers (the header
//! is row 1).
//!
//! [`import_wide_csv`] reads the looser layout of published RSSI dumps.

use std::fs::{self, File};
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use rssi_cell_core::dataset::{Dbm, MeasurementSet, RssiFrame};
use rssi_cell_core::{Error as CoreError, N_CELLS};

use crate::{Error, Result};

const RSSI_PREFIX: &str = "rssi_";

fn row_of_frame(frame: usize) -> usize {
    frame + 2
}

/// Rewrites frame-indexed core errors as row-numbered data errors.
fn ingest_error(path: &Path, err: CoreError) -> Error {
    let message = match err {
        CoreError::RssiOutOfRange { frame, value } => {
            format!("rssi out of range at row {}: {value} dBm", row_of_frame(frame))
        }
        CoreError::NonContiguous { frame, expected, found } => format!(
            "non-monotone t at row {}: expected {expected}, found {found}",
            row_of_frame(frame)
        ),
        CoreError::InvalidLabel { frame, label } => {
            format!("unknown label value {label} at row {}", row_of_frame(frame))
        }
        CoreError::FrameWidth { frame, expected, found } => format!(
            "malformed row {}: {found} rssi values, expected {expected}",
            row_of_frame(frame)
        ),
        other => other.to_string(),
    };
    Error::data(path, message)
}

fn set_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Parses a canonical CSV. `origin` only labels error messages.
pub fn parse_set(reader: impl Read, id: &str, origin: &Path) -> Result<MeasurementSet> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::data(origin, format!("unreadable header: {e}")))?.clone();
    let cols: Vec<&str> = headers.iter().collect();
    if cols.len() < 3 || cols[0] != "t" || cols[1] != "label" {
        return Err(Error::data(
            origin,
            format!("header must be `t,label,{RSSI_PREFIX}<node>,...`, found `{}`", cols.join(",")),
        ));
    }
    let mut node_labels = Vec::with_capacity(cols.len() - 2);
    for col in &cols[2..] {
        match col.strip_prefix(RSSI_PREFIX) {
            Some(name) if !name.is_empty() => node_labels.push(name.to_string()),
            _ => return Err(Error::data(origin, format!("header column `{col}` lacks the `{RSSI_PREFIX}` prefix"))),
        }
    }

    let mut frames = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::data(origin, format!("malformed row {row}: {e}")))?;
        let t: u64 = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::data(origin, format!("malformed row {row}: bad t {:?}", &record[0])))?;
        let label = match record[1].trim() {
            "" => None,
            s => match s.parse::<u8>() {
                Ok(l) if usize::from(l) < N_CELLS => Some(l),
                _ => return Err(Error::data(origin, format!("unknown label value {s:?} at row {row}"))),
            },
        };
        let rssi = record
            .iter()
            .skip(2)
            .map(|v| {
                let d: Dbm = v.parse().map_err(|_| Error::data(origin, format!("malformed row {row}: bad rssi {v:?}")))?;
                if !d.in_range() {
                    return Err(Error::data(origin, format!("rssi out of range at row {row}: {d} dBm")));
                }
                Ok(d)
            })
            .collect::<Result<Vec<_>>>()?;
        frames.push(RssiFrame::new(t, rssi, label));
    }
    MeasurementSet::new(id, node_labels, frames).map_err(|e| ingest_error(origin, e))
}

/// Loads one canonical CSV; the set id is the file stem.
pub fn load_set(path: impl AsRef<Path>) -> Result<MeasurementSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_set(BufReader::new(file), &set_id(path), path)
}

pub fn write_set(set: &MeasurementSet, writer: impl Write) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let to_io = |e: csv::Error| Error::Internal(format!("csv write failed: {e}"));
    let mut header = vec!["t".to_string(), "label".to_string()];
    header.extend(set.node_labels().iter().map(|n| format!("{RSSI_PREFIX}{n}")));
    w.write_record(&header).map_err(to_io)?;
    for f in set.frames() {
        let mut rec = Vec::with_capacity(2 + f.rssi.len());
        rec.push(f.t.to_string());
        rec.push(f.label.map(|l| l.to_string()).unwrap_or_default());
        rec.extend(f.rssi.iter().map(Dbm::to_string));
        w.write_record(&rec).map_err(to_io)?;
    }
    w.flush().map_err(|e| Error::Internal(format!("csv write failed: {e}")))?;
    Ok(())
}

/// Writes `<dir>/<id>.csv` and returns the path.
pub fn save_set(set: &MeasurementSet, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let path = dir.as_ref().join(format!("{}.csv", set.id()));
    let mut buf = Vec::new();
    write_set(set, &mut buf)?;
    fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// `*.csv` files directly inside `dir`, sorted by name.
pub fn csv_files(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "csv") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads every set in a directory, sorted by file name.
pub fn load_dir(dir: impl AsRef<Path>) -> Result<Vec<MeasurementSet>> {
    let dir = dir.as_ref();
    let files = csv_files(dir)?;
    if files.is_empty() {
        return Err(Error::data(dir, "no .csv measurement sets found"));
    }
    files.iter().map(load_set).collect()
}

const LABEL_COLUMNS: &[&str] = &["label", "labels", "class", "cell"];
const IGNORED_COLUMNS: &[&str] = &["", "t", "time", "timestamp", "sf", "superframe", "index", "idx"];

fn detect_delimiter(header_line: &str) -> u8 {
    b",;\t"
        .iter()
        .copied()
        .max_by_key(|&d| header_line.bytes().filter(|&b| b == d).count())
        .unwrap_or(b',')
}

/// Import adapter for "wide" RSSI dumps such as the published testbed data.
///
/// * delimiter `,`, `;` or tab, detected from the header;
/// * one label column (`label`, `labels`, `class` or `cell`, any case);
///   empty cells mean unlabeled, `1.0`-style floats are accepted;
/// * time or index columns (`t`, `time`, `timestamp`, `sf`, `index`, or an
///   unnamed first column) are ignored: rows are taken as consecutive
///   superframes and renumbered from 0;
/// * every other column is a sniffer node; an `rssi_` prefix is stripped;
/// * RSSI may be integer or fractional dBm and is rounded to 0.1 dBm;
///   empty, `nan` and values at or below -100 dBm become the missing-link
///   sentinel. Positive values are rejected.
pub fn import_wide_csv(path: impl AsRef<Path>, id: &str) -> Result<MeasurementSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let text = text.trim_start_matches('\u{feff}');
    let delimiter = detect_delimiter(text.lines().next().unwrap_or(""));
    let mut rdr = csv::ReaderBuilder::new().delimiter(delimiter).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::data(path, format!("unreadable header: {e}")))?.clone();

    let mut label_col = None;
    let mut node_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        let lower = h.to_ascii_lowercase();
        if LABEL_COLUMNS.contains(&lower.as_str()) && label_col.is_none() {
            label_col = Some(i);
        } else if !IGNORED_COLUMNS.contains(&lower.as_str()) {
            let name = h.strip_prefix(RSSI_PREFIX).unwrap_or(h);
            node_cols.push((i, name.to_string()));
        }
    }
    let label_col = label_col.ok_or_else(|| Error::data(path, "no label column found"))?;
    if node_cols.is_empty() {
        return Err(Error::data(path, "no sniffer columns found"));
    }

    let mut frames = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::data(path, format!("malformed row {row}: {e}")))?;
        let label = match record.get(label_col).unwrap_or("") {
            "" => None,
            s => {
                let v: f64 = s.parse().map_err(|_| Error::data(path, format!("unknown label value {s:?} at row {row}")))?;
                if v.fract() != 0.0 || !(0.0..N_CELLS as f64).contains(&v) {
                    return Err(Error::data(path, format!("unknown label value {s:?} at row {row}")));
                }
                Some(v as u8)
            }
        };
        let rssi = node_cols
            .iter()
            .map(|(c, _)| {
                let s = record.get(*c).unwrap_or("");
                if s.is_empty() || s.eq_ignore_ascii_case("nan") {
                    return Ok(Dbm::MISSING);
                }
                let v: f64 = s.parse().map_err(|_| Error::data(path, format!("malformed row {row}: bad rssi {s:?}")))?;
                if !v.is_finite() || v > 0.0 {
                    return Err(Error::data(path, format!("rssi out of range at row {row}: {s} dBm")));
                }
                Ok(Dbm::from_f64(v).max(Dbm::MISSING))
            })
            .collect::<Result<Vec<_>>>()?;
        frames.push(RssiFrame::new(i as u64, rssi, label));
    }
    let names = node_cols.into_iter().map(|(_, n)| n).collect();
    MeasurementSet::new(id, names, frames).map_err(|e| ingest_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<MeasurementSet> {
        parse_set(text.as_bytes(), "x", Path::new("x.csv"))
    }

    #[test]
    fn four_rows_two_nodes() {
        let set = parse("t,label,rssi_A,rssi_B\n0,0,-50,-60\n1,0,-51,-61.5\n2,1,-100,-62\n3,1,-53,0\n").unwrap();
        assert_eq!(set.len(), 4);
        assert_eq!(set.n_nodes(), 2);
        assert_eq!(set.node_labels(), ["A", "B"]);
        assert_eq!(set.labels().unwrap(), [0, 0, 1, 1]);
        assert_eq!(set.frames()[1].rssi[1], Dbm::from_tenths(-615));
        assert!(set.frames()[2].rssi[0].is_missing());
    }

    #[test]
    fn out_of_range_names_row() {
        let err = parse("t,label,rssi_A\n0,0,-50\n1,0,-101\n").unwrap_err();
        assert!(err.to_string().contains("rssi out of range at row 3"), "{err}");
        assert_eq!(err.exit_code(), crate::ExitCode::Data);
    }

    #[test]
    fn ingestion_errors_name_rows() {
        let cases = [
            ("t,label,rssi_A\n0,0,-50\n2,0,-50\n", "non-monotone t at row 3"),
            ("t,label,rssi_A\n0,0,-50\n1,7,-50\n", "unknown label value \"7\" at row 3"),
            ("t,label,rssi_A\n0,0,-50\n1,0,-50,-3\n", "malformed row"),
            ("t,label,rssi_A\n0,0,abc\n", "malformed row 2"),
            ("t,label,rssi_A\n0,0,-50.25\n", "malformed row 2"),
            ("t,lbl,rssi_A\n0,0,-50\n", "header"),
            ("t,label,A\n0,0,-50\n", "prefix"),
            ("t,label,rssi_A\n", "no frames"),
        ];
        for (text, needle) in cases {
            let err = parse(text).unwrap_err().to_string();
            assert!(err.contains(needle), "{text:?}: {err}");
        }
    }

    #[test]
    fn unlabeled_rows_allowed() {
        let set = parse("t,label,rssi_A\n10,,-50\n11,2,-40\n").unwrap();
        assert_eq!(set.frames()[0].label, None);
        assert_eq!(set.frames()[1].label, Some(2));
        assert_eq!(set.frames()[0].t, 10);
    }

    #[test]
    fn wide_import_tolerates_resolution_and_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("car.csv");
        fs::write(&p, ";Time;I-E;O-DR;Label\n0;0.0;-71.26;-100;0\n1;0.1;-70;;1.0\n2;0.2;-127;-55.5;\n").unwrap();
        let set = import_wide_csv(&p, "car").unwrap();
        assert_eq!(set.node_labels(), ["I-E", "O-DR"]);
        assert_eq!(set.frames()[0].rssi[0], Dbm::from_tenths(-713));
        assert!(set.frames()[1].rssi[1].is_missing());
        assert!(set.frames()[2].rssi[0].is_missing());
        assert_eq!(set.frames()[1].label, Some(1));
        assert_eq!(set.frames()[2].label, None);
        assert_eq!(set.frames()[2].t, 2);

        fs::write(&p, "I-E,label\n5,0\n").unwrap();
        assert!(import_wide_csv(&p, "car").unwrap_err().to_string().contains("rssi out of range"));
        fs::write(&p, "I-E,O-DR\n-5,-6\n").unwrap();
        assert!(import_wide_csv(&p, "car").is_err());
    }

    #[test]
    fn load_dir_sorted_by_name() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.csv"), "t,label,rssi_A\n0,0,-1\n").unwrap();
        fs::write(dir.path().join("a.csv"), "t,label,rssi_A\n0,1,-2\n").unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let sets = load_dir(dir.path()).unwrap();
        let ids: Vec<&str> = sets.iter().map(|s| s.id()).collect();
        assert_eq!(ids, ["a", "b"]);
        let empty = tempfile::tempdir().unwrap();
        assert!(load_dir(empty.path()).is_err());
    }

    proptest! {
        #[test]
        fn write_then_parse_is_identity(
            rows in proptest::collection::vec((proptest::option::of(0u8..3), proptest::collection::vec(-1000i16..=0, 3)), 1..40),
            t0 in 0u64..1_000_000,
        ) {
            let frames = rows
                .iter()
                .enumerate()
                .map(|(i, (l, r))| RssiFrame::new(t0 + i as u64, r.iter().map(|&v| Dbm::from_tenths(v)).collect(), *l))
                .collect();
            let set = MeasurementSet::new("x", vec!["I-E".into(), "O-DR".into(), "n3".into()], frames).unwrap();
            let mut buf = Vec::new();
            write_set(&set, &mut buf).unwrap();
            let back = parse_set(buf.as_slice(), "x", Path::new("x.csv")).unwrap();
            prop_assert_eq!(&back, &set);
            let mut again = Vec::new();
            write_set(&back, &mut again).unwrap();
            prop_assert_eq!(buf, again);
        }
    }
}
