//! CSV serialization of run logs and sweep summaries.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use csv::{Terminator, WriterBuilder};
use mixgeo_core::{Real, RunLog};

pub const RUN_LOG_COLUMNS: [&str; 10] = [
    "iter",
    "tau",
    "energy_total",
    "energy_regularizer",
    "energy_fidelity",
    "r",
    "psnr_db",
    "ssim",
    "wall_ms",
    "modified_energy",
];

pub const SUMMARY_COLUMNS: [&str; 4] = ["value", "best_psnr", "best_iter", "wall_s"];

/// Shortest round-trip decimal; absent values become empty cells.
pub fn cell<V: std::fmt::Display>(v: Option<V>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    WriterBuilder::new().terminator(Terminator::Any(b'\n')).from_writer(out)
}

pub fn write_run_log<T: Real, W: Write>(log: &RunLog<T>, out: W) -> anyhow::Result<()> {
    let mut w = writer(out);
    w.write_record(RUN_LOG_COLUMNS)?;
    for rec in &log.records {
        w.write_record([
            rec.iter.to_string(),
            rec.tau.to_string(),
            rec.energy.total.to_string(),
            rec.energy.regularizer.to_string(),
            rec.energy.fidelity.to_string(),
            cell(rec.r),
            cell(rec.psnr_db),
            cell(rec.ssim),
            cell(rec.wall_ms),
            cell(rec.modified_energy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn run_log_bytes<T: Real>(log: &RunLog<T>) -> anyhow::Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_run_log(log, &mut buf)?;
    Ok(buf)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub value: String,
    pub best_psnr: Option<f64>,
    pub best_iter: Option<usize>,
    pub wall_s: Option<f64>,
}

pub fn summary_bytes(rows: &[SummaryRow]) -> anyhow::Result<Vec<u8>> {
    let mut w = writer(Vec::new());
    w.write_record(SUMMARY_COLUMNS)?;
    for row in rows {
        w.write_record([row.value.clone(), cell(row.best_psnr), cell(row.best_iter), cell(row.wall_s)])?;
    }
    w.into_inner().context("flushing summary")
}

pub fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    crate::io::write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))
}
