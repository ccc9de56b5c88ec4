//! CSV and JSON writers for benchmark rows and solver traces.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ap::RunReport;
use crate::error::{Error, Result};
use crate::lpr::LprTrace;

/// Exact header of the benchmark table.
pub const CSV_HEADER: [&str; 8] =
    ["algorithm", "snr_db", "psnr_db", "ssim", "wall_seconds", "iterations", "converged", "status"];

/// One (algorithm, SNR) cell of the benchmark grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub algorithm: String,
    /// `inf` for the noiseless cell.
    pub snr_db: f64,
    pub psnr_db: Option<f64>,
    pub ssim: Option<f64>,
    pub wall_seconds: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// `ok`, `diverged at iteration k` or `error: ...`.
    pub status: String,
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

/// Serialize rows with [`CSV_HEADER`]; missing values are empty fields.
pub fn write_rows<W: Write>(out: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.algorithm.clone(),
            num(r.snr_db),
            opt(r.psnr_db),
            opt(r.ssim),
            opt(r.wall_seconds),
            r.iterations.to_string(),
            r.converged.to_string(),
            r.status.clone(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut buf = Vec::new();
    write_rows(&mut buf, rows).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8")
}

pub fn write_rows_csv(path: impl AsRef<Path>, rows: &[BenchRow]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_rows(std::io::BufWriter::new(f), rows)
}

fn at(v: &[f64], k: usize) -> String {
    v.get(k).copied().map(num).unwrap_or_default()
}

/// One row per iteration: `iteration,residual,intensity_change,gradient_norm,psnr,ssim`.
pub fn run_report_csv(r: &RunReport) -> String {
    let mut s = String::from("iteration,residual,intensity_change,gradient_norm,psnr,ssim\n");
    for k in 0..r.iterations {
        s += &format!(
            "{},{},{},{},{},{}\n",
            k + 1,
            at(&r.residuals, k),
            at(&r.intensity_changes, k),
            at(&r.gradient_norms, k),
            at(&r.psnr, k),
            at(&r.ssim, k)
        );
    }
    s
}

/// One row per outer iteration, with the enhancer strength used.
pub fn lpr_trace_csv(t: &LprTrace) -> String {
    let mut s = String::from("iteration,residual,intensity_change,strength,psnr,ssim\n");
    for k in 0..t.outer_iterations {
        s += &format!(
            "{},{},{},{},{},{}\n",
            k + 1,
            at(&t.residuals, k),
            at(&t.intensity_changes, k),
            at(&t.strengths, k),
            at(&t.psnr, k),
            at(&t.ssim, k)
        );
    }
    s
}
