//! Benchmark result rows and their CSV form.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 14] = [
    "dataset",
    "index",
    "config",
    "size_bytes",
    "build_ns",
    "avg_lookup_ns",
    "p50_ns",
    "p99_ns",
    "avg_log2_bound",
    "threads",
    "fence",
    "cache_mode",
    "checksum",
    "violations",
];

/// One benchmarked configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub dataset: String,
    pub index: String,
    pub config: String,
    pub size_bytes: u64,
    pub build_ns: u64,
    pub avg_lookup_ns: f64,
    pub p50_ns: f64,
    pub p99_ns: f64,
    pub avg_log2_bound: f64,
    pub threads: usize,
    pub fence: String,
    pub cache_mode: String,
    pub checksum: u64,
    pub violations: u64,
}

impl BenchRecord {
    /// Point used for Pareto analysis: (size, average latency).
    pub fn size_latency(&self) -> (f64, f64) {
        (self.size_bytes as f64, self.avg_lookup_ns)
    }

    fn fields(&self) -> [String; 14] {
        [
            self.dataset.clone(),
            self.index.clone(),
            self.config.clone(),
            self.size_bytes.to_string(),
            self.build_ns.to_string(),
            format!("{:.3}", self.avg_lookup_ns),
            format!("{:.3}", self.p50_ns),
            format!("{:.3}", self.p99_ns),
            format!("{:.3}", self.avg_log2_bound),
            self.threads.to_string(),
            self.fence.clone(),
            self.cache_mode.clone(),
            self.checksum.to_string(),
            self.violations.to_string(),
        ]
    }
}

/// Writes the header and one row per record; reals get three decimals.
pub fn write_csv_to<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let wrap = |e: csv::Error| Error::Format(format!("writing CSV: {e}"));
    w.write_record(CSV_HEADER).map_err(wrap)?;
    for r in records {
        w.write_record(r.fields()).map_err(wrap)?;
    }
    w.flush()
        .map_err(|e| Error::Format(format!("writing CSV: {e}")))
}

pub fn write_csv(records: &[BenchRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(records, BufWriter::new(file)).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<BenchRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r
        .headers()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Format(format!(
            "{}: unexpected CSV header {:?}",
            path.display(),
            header.iter().collect::<Vec<_>>()
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Format(format!("{}: {e}", path.display()))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> BenchRecord {
        BenchRecord {
            dataset: "uniform-1000".into(),
            index: "rs".into(),
            config: "32:12/binary".into(),
            size_bytes: 1234,
            build_ns: 5678,
            avg_lookup_ns: 41.23456,
            p50_ns: 40.0,
            p99_ns: 99.9999,
            avg_log2_bound: 6.0,
            threads: 1,
            fence: "off".into(),
            cache_mode: "warm".into(),
            checksum: u64::MAX,
            violations: 0,
        }
    }

    #[test]
    fn empty_is_header_only() {
        let mut out = Vec::new();
        write_csv_to(&[], &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "dataset,index,config,size_bytes,build_ns,avg_lookup_ns,p50_ns,p99_ns,avg_log2_bound,threads,fence,cache_mode,checksum,violations\n"
        );
    }

    #[test]
    fn formatting_and_round_trip() {
        let mut out = Vec::new();
        write_csv_to(&[record()], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "uniform-1000,rs,32:12/binary,1234,5678,41.235,40.000,100.000,6.000,1,off,warm,18446744073709551615,0"
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        write_csv(&[record(), record()], &path).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].checksum, u64::MAX);
        assert_eq!(back[0].avg_lookup_ns, 41.235);
        assert_eq!(back[0].config, "32:12/binary");
    }

    #[test]
    fn rejects_wrong_header_and_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(read_csv(&path).unwrap_err().to_string().contains("bad.csv"));
        let err = write_csv(&[], dir.path().join("no/such/dir.csv")).unwrap_err();
        assert!(err.to_string().contains("dir.csv"));
    }
}
