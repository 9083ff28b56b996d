//! CSV ingestion and emission, and atomic file writes.
//!
//! Dialect: comma separated, header required, UTF-8, `.` decimal separator.
//! Floats are written with Rust's shortest round-trip representation.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::bootstrap::LossTable;
use crate::engine::{validate_stream, Observation, RunRecord};
use crate::error::{Error, Result};
use crate::timestamp::Timestamp;

/// Which CSV columns feed an [`Observation`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub timestamp: String,
    pub target: String,
    /// Base-prediction columns in pool order; every remaining column when absent.
    pub base: Option<Vec<String>>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            timestamp: "timestamp".into(),
            target: "y".into(),
            base: None,
        }
    }
}

/// Observations plus the base column names they were read from.
#[derive(Clone, Debug, PartialEq)]
pub struct Ingested {
    pub base_names: Vec<String>,
    pub stream: Vec<Observation>,
}

pub fn ingest_csv(path: &Path, columns: &ColumnMap) -> Result<Ingested> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_observations(file, columns)
}

pub fn read_observations<R: Read>(reader: R, columns: &ColumnMap) -> Result<Ingested> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Ingest {
                row: 0,
                column: Some(name.to_string()),
                msg: "missing column".into(),
            })
    };
    let ts_col = find(&columns.timestamp)?;
    let y_col = find(&columns.target)?;
    let base_names: Vec<String> = match &columns.base {
        Some(names) => names.clone(),
        None => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != ts_col && *i != y_col)
            .map(|(_, h)| h.clone())
            .collect(),
    };
    if base_names.is_empty() {
        return Err(Error::Ingest {
            row: 0,
            column: None,
            msg: "no base-prediction columns".into(),
        });
    }
    let base_cols: Vec<usize> = base_names.iter().map(|n| find(n)).collect::<Result<_>>()?;

    let mut stream = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let cell = |col: usize| rec.get(col).unwrap_or("");
        let ts: Timestamp =
            cell(ts_col)
                .parse()
                .map_err(|e: crate::timestamp::ParseTimestampError| Error::Ingest {
                    row,
                    column: Some(headers[ts_col].clone()),
                    msg: e.to_string(),
                })?;
        let number = |col: usize| -> Result<f64> {
            let raw = cell(col);
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(v) => Err(Error::Ingest {
                    row,
                    column: Some(headers[col].clone()),
                    msg: format!("non-finite value {v}"),
                }),
                Err(_) => Err(Error::Ingest {
                    row,
                    column: Some(headers[col].clone()),
                    msg: format!("cannot parse '{raw}' as a number"),
                }),
            }
        };
        let y = number(y_col)?;
        let z = base_cols
            .iter()
            .map(|&c| number(c))
            .collect::<Result<Vec<_>>>()?;
        stream.push(Observation {
            timestamp: ts,
            y,
            z,
        });
    }
    validate_stream(&stream, base_names.len())?;
    Ok(Ingested { base_names, stream })
}

/// Stream in ingestion format: `timestamp,y,<base names…>`.
pub fn emit_observations(stream: &[Observation], base_names: &[String]) -> String {
    let mut out = String::from("timestamp,y");
    for n in base_names {
        write!(out, ",{n}").unwrap();
    }
    out.push('\n');
    for o in stream {
        write!(out, "{},{}", o.timestamp, o.y).unwrap();
        for v in &o.z {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Default base column names `z1..zM`.
pub fn base_names(m: usize) -> Vec<String> {
    (1..=m).map(|j| format!("z{j}")).collect()
}

/// Per-step records: `timestamp,y,agg_pred,expert_pred_1..N,weight_1..N`.
pub fn records_csv(records: &[RunRecord]) -> String {
    let n = records.first().map_or(0, |r| r.expert_preds.len());
    let mut out = String::from("timestamp,y,agg_pred");
    for j in 1..=n {
        write!(out, ",expert_pred_{j}").unwrap();
    }
    for j in 1..=n {
        write!(out, ",weight_{j}").unwrap();
    }
    out.push('\n');
    for r in records {
        write!(out, "{},{},{}", r.timestamp, r.y, r.agg_pred).unwrap();
        for v in r.expert_preds.iter().chain(&r.weights) {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Long-format plot data: `step,series,value` with 1-based steps.
pub fn tidy_csv<'a, I>(series: I) -> String
where
    I: IntoIterator<Item = (&'a str, &'a [f64])>,
{
    let mut out = String::from("step,series,value\n");
    for (name, values) in series {
        for (i, v) in values.iter().enumerate() {
            writeln!(out, "{},{name},{v}", i + 1).unwrap();
        }
    }
    out
}

/// `timestamp,<method…>` table of per-step squared losses.
pub fn loss_table_csv(table: &LossTable) -> String {
    let mut out = String::from("timestamp");
    for m in table.methods.keys() {
        write!(out, ",{m}").unwrap();
    }
    out.push('\n');
    for (i, t) in table.timestamps.iter().enumerate() {
        write!(out, "{t}").unwrap();
        for losses in table.methods.values() {
            write!(out, ",{}", losses[i]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn read_loss_table<R: Read>(reader: R) -> Result<LossTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers.len() < 2 {
        return Err(Error::Ingest {
            row: 0,
            column: None,
            msg: "loss table needs a timestamp column and at least one method".into(),
        });
    }
    let mut timestamps = Vec::new();
    let mut methods: IndexMap<String, Vec<f64>> = headers[1..]
        .iter()
        .map(|h| (h.clone(), Vec::new()))
        .collect();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let ts: Timestamp = rec.get(0).unwrap_or("").parse().map_err(
            |e: crate::timestamp::ParseTimestampError| Error::Ingest {
                row,
                column: Some(headers[0].clone()),
                msg: e.to_string(),
            },
        )?;
        timestamps.push(ts);
        for (j, name) in headers.iter().enumerate().skip(1) {
            let raw = rec.get(j).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| Error::Ingest {
                row,
                column: Some(name.clone()),
                msg: format!("cannot parse '{raw}' as a number"),
            })?;
            methods[name.as_str()].push(v);
        }
    }
    let table = LossTable {
        timestamps,
        methods,
    };
    table.validate()?;
    Ok(table)
}

pub fn read_loss_table_file(path: &Path) -> Result<LossTable> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_loss_table(file)
}

/// Write through a sibling temporary file and rename into place.
pub fn write_atomic(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::config(format!("'{}' is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
