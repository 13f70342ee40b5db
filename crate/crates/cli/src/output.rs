//! CSV and JSON writers. All floats are printed with `{:.16e}` (17
//! significant digits) so a rerun with the same seed reproduces files
//! byte for byte and a round-trip through the text loses nothing.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::Failure;

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// One trajectory sample in the shared CSV schema; discrete runs use the
/// iteration index and t = iter·ε, continuous runs the sample index and the
/// integration time. Unknown quantities (no minimizer, no certificate) are
/// written as NaN, never silently dropped.
pub struct TrajectoryRow {
    pub iter: usize,
    pub t: f64,
    pub subopt: f64,
    pub h: f64,
    pub v: f64,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

pub fn write_trajectory_csv(
    path: &Path,
    dim: usize,
    rows: &[TrajectoryRow],
) -> Result<(), Failure> {
    let mut text = String::from("iter,t,subopt,H,V");
    for i in 0..dim {
        text.push_str(&format!(",x_{i}"));
    }
    for i in 0..dim {
        text.push_str(&format!(",p_{i}"));
    }
    text.push('\n');
    for row in rows {
        text.push_str(&row.iter.to_string());
        for v in [row.t, row.subopt, row.h, row.v] {
            text.push(',');
            text.push_str(&fmt_float(v));
        }
        for v in row.x.iter().chain(row.p.iter()) {
            text.push(',');
            text.push_str(&fmt_float(*v));
        }
        text.push('\n');
    }
    write_file(path, text.as_bytes())
}

/// Generic CSV writer: a header line and rows of pre-formatted cells.
pub fn write_csv(
    path: &Path,
    header: &str,
    rows: &[Vec<String>],
) -> Result<(), Failure> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    write_file(path, text.as_bytes())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::Io(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| Failure::Io(format!("cannot create {}: {e}", path.display())))?;
    file.write_all(bytes)
        .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}
