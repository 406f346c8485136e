//! CSV traces and per-run summaries.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::IterationRecord;

/// `t,x1..xm,w1..wK,stationarity_wt,stationarity_min,ca_distance,f1..fK`
pub fn trace_header(dim: usize, tasks: usize) -> Vec<String> {
    let mut h = Vec::with_capacity(dim + 2 * tasks + 4);
    h.push("t".to_string());
    h.extend((1..=dim).map(|i| format!("x{i}")));
    h.extend((1..=tasks).map(|k| format!("w{k}")));
    h.extend(["stationarity_wt", "stationarity_min", "ca_distance"].map(String::from));
    h.extend((1..=tasks).map(|k| format!("f{k}")));
    h
}

/// 17 significant digits: parsing the text gives back the same `f64`.
fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Serializes records to CSV bytes.
pub fn trace_to_csv(records: &[IterationRecord], dim: usize, tasks: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let row_err = |e: csv::Error| Error::Trace(e.to_string());
    w.write_record(trace_header(dim, tasks)).map_err(row_err)?;
    for r in records {
        if r.x.len() != dim || r.w.len() != tasks || r.values.len() != tasks {
            return Err(Error::Trace(format!(
                "record at t = {} does not match dim {dim}, K {tasks}",
                r.t
            )));
        }
        let mut row = Vec::with_capacity(dim + 2 * tasks + 4);
        row.push(r.t.to_string());
        row.extend(r.x.iter().map(|&v| fmt_float(v)));
        row.extend(r.w.iter().map(|&v| fmt_float(v)));
        row.push(fmt_float(r.stationarity_wt));
        row.push(fmt_float(r.stationarity_min));
        row.push(fmt_float(r.ca_distance));
        row.extend(r.values.iter().map(|&v| fmt_float(v)));
        w.write_record(&row).map_err(row_err)?;
    }
    w.into_inner().map_err(|e| Error::Trace(e.to_string()))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_trace(path: &Path, records: &[IterationRecord], dim: usize, tasks: usize) -> Result<()> {
    write_atomic(path, &trace_to_csv(records, dim, tasks)?)
}

/// Parses a trace back into records. `grad_norms` is not part of the format
/// and comes back empty.
pub fn parse_trace(text: &str) -> Result<Vec<IterationRecord>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Trace(e.to_string()))?.clone();
    let count = |prefix: char| {
        header
            .iter()
            .filter(|h| h.starts_with(prefix) && h[1..].parse::<usize>().is_ok())
            .count()
    };
    let (dim, tasks) = (count('x'), count('w'));
    let expected = trace_header(dim, tasks);
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Trace(format!(
            "unexpected header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut records = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::Trace(e.to_string()))?;
        let float = |i: usize| -> Result<f64> {
            row[i]
                .parse()
                .map_err(|_| Error::Trace(format!("row {}: column `{}` is not a number", line + 1, expected[i])))
        };
        let t = row[0]
            .parse()
            .map_err(|_| Error::Trace(format!("row {}: bad iteration index `{}`", line + 1, &row[0])))?;
        let x = (1..=dim).map(float).collect::<Result<Vec<_>>>()?;
        let w = (dim + 1..=dim + tasks).map(float).collect::<Result<Vec<_>>>()?;
        let base = dim + tasks + 1;
        records.push(IterationRecord {
            t,
            x,
            w,
            stationarity_wt: float(base)?,
            stationarity_min: float(base + 1)?,
            ca_distance: float(base + 2)?,
            values: (base + 3..base + 3 + tasks).map(float).collect::<Result<Vec<_>>>()?,
            grad_norms: Vec::new(),
        });
    }
    Ok(records)
}

pub fn read_trace(path: &Path) -> Result<Vec<IterationRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text)
}

/// Statistics of the recorded rows of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceStats {
    /// `min_w ||grad F(x) w||^2` at the last record.
    pub final_stationarity: f64,
    pub avg_stationarity_wt: f64,
    pub avg_ca_distance: f64,
    pub max_ca_distance: f64,
    pub avg_ca_distance_sq: f64,
    pub rows: usize,
}

impl TraceStats {
    pub fn from_records(records: &[IterationRecord]) -> Self {
        let n = records.len();
        if n == 0 {
            return TraceStats::default();
        }
        let nf = n as f64;
        let sum = |f: &dyn Fn(&IterationRecord) -> f64| records.iter().map(f).sum::<f64>();
        TraceStats {
            final_stationarity: records[n - 1].stationarity_min,
            avg_stationarity_wt: sum(&|r| r.stationarity_wt) / nf,
            avg_ca_distance: sum(&|r| r.ca_distance) / nf,
            max_ca_distance: records.iter().map(|r| r.ca_distance).fold(0.0, f64::max),
            avg_ca_distance_sq: sum(&|r| r.ca_distance * r.ca_distance) / nf,
            rows: n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    #[serde(flatten)]
    pub stats: TraceStats,
    pub iterations_completed: usize,
    pub diverged: bool,
    pub error: Option<String>,
    pub wall_clock_seconds: f64,
    /// File name of the trace, relative to the summary.
    pub trace: String,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: usize, x: f64) -> IterationRecord {
        IterationRecord {
            t,
            x: vec![x, -x / 3.0],
            w: vec![0.1 + 1e-17, 0.9],
            stationarity_wt: x * x / 7.0,
            stationarity_min: 1e-300 * x,
            ca_distance: std::f64::consts::PI * x,
            values: vec![x.exp(), 1.0 / 3.0],
            grad_norms: vec![],
        }
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            trace_header(2, 2).join(","),
            "t,x1,x2,w1,w2,stationarity_wt,stationarity_min,ca_distance,f1,f2"
        );
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let records: Vec<_> = (0..20).map(|t| record(t, 0.1 * t as f64 + 1.0 / 7.0)).collect();
        let bytes = trace_to_csv(&records, 2, 2).unwrap();
        let parsed = parse_trace(std::str::from_utf8(&bytes).unwrap()).unwrap();
        assert_eq!(parsed, records);
        assert_eq!(TraceStats::from_records(&parsed), TraceStats::from_records(&records));
    }

    #[test]
    fn malformed_traces_are_rejected() {
        assert!(parse_trace("a,b\n1,2\n").is_err());
        assert!(parse_trace("t,x1,w1,stationarity_wt,stationarity_min,ca_distance,f1\n0,1,1,zz,0,0,0\n").is_err());
        assert!(trace_to_csv(&[record(0, 1.0)], 3, 2).is_err());
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn empty_stats() {
        assert_eq!(TraceStats::from_records(&[]).rows, 0);
    }
}
