//! Sweep summaries, CSV output and run manifests.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use isac_core::predictors::Method;

use crate::config::ExperimentConfig;

pub const CSV_HEADER: [&str; 7] = [
    "nmse",
    "power_dbm",
    "method",
    "mean_sum_rate",
    "std_sum_rate",
    "realizations",
    "seed",
];

/// Mean and spread of the sum rate for one method at one operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub nmse: f64,
    pub power_dbm: f64,
    pub method: Method,
    pub mean_sum_rate: f64,
    pub std_sum_rate: f64,
    pub realizations: usize,
    pub seed: u64,
}

/// Orders rows by method tag, then NMSE, then power.
pub fn sort_results(rows: &mut [SweepResult]) {
    rows.sort_by(|a, b| {
        a.method
            .tag()
            .cmp(b.method.tag())
            .then(a.nmse.total_cmp(&b.nmse))
            .then(a.power_dbm.total_cmp(&b.power_dbm))
    });
}

pub fn write_csv<W: io::Write>(out: W, rows: &[SweepResult]) -> csv::Result<()> {
    let mut sorted = rows.to_vec();
    sort_results(&mut sorted);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in &sorted {
        w.write_record([
            r.nmse.to_string(),
            r.power_dbm.to_string(),
            r.method.tag().to_owned(),
            r.mean_sum_rate.to_string(),
            r.std_sum_rate.to_string(),
            r.realizations.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(rows: &[SweepResult]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).expect("writing to memory does not fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unexpected CSV header")]
    Header,
    #[error("row {row}: bad field `{field}`")]
    Field { row: usize, field: String },
}

pub fn read_csv<R: io::Read>(input: R) -> Result<Vec<SweepResult>, ReadError> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(CSV_HEADER) {
        return Err(ReadError::Header);
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |j: usize| -> Result<&str, ReadError> {
            rec.get(j).ok_or(ReadError::Field {
                row: i + 1,
                field: CSV_HEADER[j].to_owned(),
            })
        };
        let bad = |j: usize| ReadError::Field {
            row: i + 1,
            field: CSV_HEADER[j].to_owned(),
        };
        rows.push(SweepResult {
            nmse: field(0)?.parse().map_err(|_| bad(0))?,
            power_dbm: field(1)?.parse().map_err(|_| bad(1))?,
            method: field(2)?.parse().map_err(|_| bad(2))?,
            mean_sum_rate: field(3)?.parse().map_err(|_| bad(3))?,
            std_sum_rate: field(4)?.parse().map_err(|_| bad(4))?,
            realizations: field(5)?.parse().map_err(|_| bad(5))?,
            seed: field(6)?.parse().map_err(|_| bad(6))?,
        });
    }
    Ok(rows)
}

/// Writes `<stem>.csv` and the resolved configuration `<stem>.config` into `dir`.
pub fn write_sweep(dir: &Path, stem: &str, rows: &[SweepResult], cfg: &ExperimentConfig) -> io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    std::fs::write(&csv_path, csv_string(rows))?;
    std::fs::write(dir.join(format!("{stem}.config")), cfg.to_text())?;
    Ok(csv_path)
}

/// Plain-text record of a run: command, tool version, seed, resolved
/// configuration and the files written.
pub fn manifest_text(command: &str, cfg: &ExperimentConfig, outputs: &[PathBuf], notes: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "command = {command}");
    let _ = writeln!(s, "version = {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "seed = {}", cfg.seed);
    for o in outputs {
        let _ = writeln!(s, "output = {}", o.display());
    }
    for n in notes {
        let _ = writeln!(s, "note = {n}");
    }
    let _ = writeln!(s, "\n[config]");
    s.push_str(&cfg.to_text());
    s
}

pub fn write_manifest(
    dir: &Path,
    command: &str,
    cfg: &ExperimentConfig,
    outputs: &[PathBuf],
    notes: &[String],
) -> io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{command}.manifest.txt"));
    std::fs::write(&path, manifest_text(command, cfg, outputs, notes))?;
    Ok(path)
}
