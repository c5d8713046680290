//! Result tables and their CSV, JSON and manifest serialisation.
//!
//! Numbers are rounded to 12 significant digits and written in plain decimal
//! notation, so identical runs produce byte-identical files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Significant digits of every number written to a table.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// `x` rounded to [`SIGNIFICANT_DIGITS`] significant digits.
pub fn round_significant(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Decimal text of `x` with at most [`SIGNIFICANT_DIGITS`] significant digits.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let v = round_significant(x);
    if v == 0.0 {
        "0".into()
    } else {
        format!("{v}")
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Num(v) => format_number(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(round_significant(*v))
                .map_or(serde_json::Value::Null, serde_json::Value::Number),
            Cell::Int(v) => serde_json::Value::from(*v),
            Cell::Text(s) => serde_json::Value::from(s.as_str()),
            Cell::Empty => serde_json::Value::Null,
        }
    }
}

/// A named, fixed-schema table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    /// Appends a row; panics if the width does not match the header.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::text))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Array of objects keyed by column name.
    pub fn to_json(&self) -> serde_json::Value {
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let obj: serde_json::Map<String, serde_json::Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.to_string(), v.json()))
                    .collect();
                serde_json::Value::Object(obj)
            })
            .collect();
        serde_json::Value::Array(rows)
    }

    fn render(&self, format: Format) -> CliResult<Vec<u8>> {
        match format {
            Format::Csv => {
                let mut buf = Vec::new();
                self.write_csv(&mut buf)
                    .map_err(|e| CliError::io(format!("cannot format CSV: {e}")))?;
                Ok(buf)
            }
            Format::Json => {
                let mut buf = serde_json::to_vec_pretty(&self.to_json())
                    .map_err(|e| CliError::io(format!("cannot format JSON: {e}")))?;
                buf.push(b'\n');
                Ok(buf)
            }
        }
    }
}

/// Data file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Provenance record written next to every output file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    /// Subcommand that produced the outputs.
    pub command: String,
    /// Resolved configuration; usable as a config file to rerun.
    pub config: BTreeMap<String, String>,
    /// Master seed.
    pub seed: u64,
    /// Version of the program.
    pub version: String,
    /// Seconds since the Unix epoch at which the run finished.
    pub timestamp: u64,
    /// Files written by the run, manifest excluded.
    pub outputs: Vec<String>,
    /// Command-specific results (optimal `c`, fitted slopes, ...).
    pub metadata: BTreeMap<String, serde_json::Value>,
}

/// Output of one command: a main table, optional named side tables and
/// summary metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub table: Table,
    pub extra: Vec<(&'static str, Table)>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl CommandOutput {
    pub fn new(table: Table) -> Self {
        CommandOutput {
            table,
            extra: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }
}

/// Path of the manifest written next to `data`.
pub fn manifest_path(data: &Path) -> PathBuf {
    let mut name = data.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    data.with_file_name(name)
}

fn side_path(data: &Path, suffix: &str, format: Format) -> PathBuf {
    let stem = data.file_stem().unwrap_or_default().to_string_lossy();
    data.with_file_name(format!("{stem}.{suffix}.{}", format.extension()))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

/// Writes the tables to `out` (or the main table to stdout) and, for file
/// output, a manifest next to them.
pub fn emit(
    output: &CommandOutput,
    format: Format,
    out: Option<&Path>,
    mut manifest: RunManifest,
) -> CliResult<()> {
    if output.table.rows.is_empty() {
        return Err(CliError::empty("the result table is empty; nothing to write"));
    }
    let Some(path) = out else {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        lock.write_all(&output.table.render(format)?)
            .map_err(|e| CliError::io(format!("cannot write to stdout: {e}")))?;
        for (suffix, table) in &output.extra {
            eprintln!("--- {suffix} ---");
            let bytes = table.render(format)?;
            eprint!("{}", String::from_utf8_lossy(&bytes));
        }
        return Ok(());
    };
    write_file(path, &output.table.render(format)?)?;
    manifest.outputs.push(path.display().to_string());
    for (suffix, table) in &output.extra {
        let side = side_path(path, suffix, format);
        write_file(&side, &table.render(format)?)?;
        manifest.outputs.push(side.display().to_string());
    }
    manifest.metadata = output.metadata.clone();
    let mut bytes = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| CliError::io(format!("cannot format manifest: {e}")))?;
    bytes.push(b'\n');
    write_file(&manifest_path(path), &bytes)
}
