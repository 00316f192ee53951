//! Versioned CSV tables and JSON reports.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use crate::sweep::PointSummary;

pub const SWEEP_SCHEMA: &str = "# qcldpc fer-sweep v1";
pub const THROUGHPUT_SCHEMA: &str = "# qcldpc throughput v1";
pub const SKR_SCHEMA: &str = "# qcldpc skr-opt v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub snr: f64,
    pub frames: u64,
    pub failures_raw: u64,
    pub failures_after_erase: u64,
    pub fer_raw: f64,
    pub fer_erased: f64,
    pub n_err: u64,
    pub wilson_raw_lo: f64,
    pub wilson_raw_hi: f64,
    pub wilson_erased_lo: f64,
    pub wilson_erased_hi: f64,
    pub avg_iterations: f64,
}

impl From<&PointSummary> for SweepRow {
    fn from(p: &PointSummary) -> Self {
        let (rl, rh) = p.ci_raw();
        let (el, eh) = p.ci_erased();
        SweepRow {
            snr: p.snr,
            frames: p.frames,
            failures_raw: p.failures_raw,
            failures_after_erase: p.failures_after_erase,
            fer_raw: p.fer_raw(),
            fer_erased: p.fer_erased(),
            n_err: p.n_err,
            wilson_raw_lo: rl,
            wilson_raw_hi: rh,
            wilson_erased_lo: el,
            wilson_erased_hi: eh,
            avg_iterations: p.avg_iterations,
        }
    }
}

/// Writes `schema` as a comment line, then a header and one row per record.
pub fn write_csv<T: Serialize>(
    out: &mut dyn Write,
    schema: &str,
    rows: &[T],
) -> anyhow::Result<()> {
    writeln!(out, "{schema}")?;
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`write_csv`], checking its schema line.
pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path, schema: &str) -> anyhow::Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    if first.trim_end() != schema {
        bail!(
            "{}: expected schema line '{schema}', found '{}'",
            path.display(),
            first.trim_end()
        );
    }
    let mut r = csv::Reader::from_reader(reader);
    let rows = r
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok(rows)
}

/// Runs `f` against the file at `path`, or against stdout when `None`.
pub fn with_output(
    path: Option<&Path>,
    f: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            let mut file = io::BufWriter::new(
                File::create(p).with_context(|| format!("creating {}", p.display()))?,
            );
            f(&mut file)?;
            file.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    with_output(Some(path), |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}
