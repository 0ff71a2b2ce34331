//! Report envelopes, CSV tables and atomic file writes.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::{Format, Job};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// What a command produced, before anything is written.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub result: Value,
    pub csv: Option<Table>,
    pub svg: Option<String>,
    /// One-paragraph human summary.
    pub summary: String,
    pub inconclusive: bool,
}

/// SHA-256 of the compact JSON form of the job; object keys are sorted.
pub fn config_hash(job: &Job) -> Result<String> {
    let canonical = serde_json::to_string(&serde_json::to_value(job)?)?;
    Ok(Sha256::digest(canonical.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
}

/// The JSON report: carries the config, its hash and the library version.
pub fn envelope(job: &Job, result: &Value) -> Result<String> {
    let body = json!({
        "command": job.command.as_str(),
        "version": VERSION,
        "config_hash": config_hash(job)?,
        "config": job,
        "result": result,
    });
    let mut s = serde_json::to_string_pretty(&body)?;
    s.push('\n');
    Ok(s)
}

pub fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}

/// A header plus rows of numbers.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|&v| fmt_num(v)))?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?)?)
    }
}

/// Shortest round-trip form; exponent notation outside `[1e-4, 1e15)`.
pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Writes the requested artifacts under `dir` and returns their paths.
/// An empty `formats` list means every artifact the command produced.
pub fn write_artifacts(dir: &Path, stem: &str, formats: &[Format], report: &str, out: &Outcome) -> Result<Vec<PathBuf>> {
    let all = [Format::Json, Format::Csv, Format::Svg];
    let wanted: Vec<Format> = if formats.is_empty() { all.to_vec() } else { formats.to_vec() };
    let mut written = Vec::new();
    for f in wanted {
        let body = match f {
            Format::Json => Some(report.to_string()),
            Format::Csv => out.csv.as_ref().map(Table::to_csv).transpose()?,
            Format::Svg => out.svg.clone(),
        };
        match body {
            Some(body) => {
                let path = dir.join(format!("{stem}.{}", f.ext()));
                write_atomic(&path, &body)?;
                written.push(path);
            }
            None if !formats.is_empty() => {
                eprintln!("note: `{stem}` produces no {} output", f.ext());
            }
            None => {}
        }
    }
    Ok(written)
}
