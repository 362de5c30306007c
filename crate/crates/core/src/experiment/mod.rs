//! Experiment configs, runners and result files for the `quantcap` CLI.
//!
//! [`run`] evaluates a config entirely in memory; [`write_outcome`] then
//! writes the result tables and the fully resolved config into the output
//! directory. Nothing is written when the run fails.

pub mod config;
mod runners;

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub use config::{
    defaults_document, flatten, Bits, ChannelConfig, ExperimentConfig, Experiment, Grid, MethodConfig, OutputConfig,
    OutputFormat, PlanConfig, QuantizerConfig, CONFIG_VERSION, DEFAULT_KAPPA, EXPERIMENT_NAMES,
};

/// Name of the resolved-config file written next to the results.
pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.json";

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Null,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Null, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl Cell {
    fn csv_field(&self) -> String {
        match self {
            Cell::Num(v) => v.to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Null => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Bool(b) => Value::from(*b),
            Cell::Null => Value::Null,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Int(v) => Some(*v as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }
}

/// Result of an experiment: plot-ready tables plus an optional structured report.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub experiment: String,
    pub seed: u64,
    pub tables: Vec<Table>,
    pub details: Option<Value>,
}

impl Outcome {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    runners::run(cfg)
}

/// Process exit code for a failed run: 2 for bad inputs, 3 for numerical failures.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_input_error() {
        2
    } else {
        3
    }
}

fn stamp(t: &Table, seed: u64) -> (Vec<String>, Vec<Vec<Cell>>) {
    let mut cols = t.columns.clone();
    cols.push("seed".into());
    cols.push("version".into());
    let rows = t
        .rows
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.push(Cell::Int(seed as i64));
            r.push(Cell::Text(crate::VERSION.into()));
            r
        })
        .collect();
    (cols, rows)
}

fn csv_bytes(cols: &[String], rows: &[Vec<Cell>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(cols).map_err(io)?;
    for r in rows {
        w.write_record(r.iter().map(Cell::csv_field)).map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
}

/// Serialized result files, keyed by file name, in write order.
pub fn render(cfg: &ExperimentConfig, out: &Outcome) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    match cfg.output.format {
        OutputFormat::Csv => {
            for t in &out.tables {
                let (cols, rows) = stamp(t, out.seed);
                files.push((format!("{}.csv", t.name), csv_bytes(&cols, &rows)?));
            }
            if let Some(d) = &out.details {
                files.push(("details.json".into(), pretty(d)));
            }
        }
        OutputFormat::Json => {
            let mut tables = Map::new();
            for t in &out.tables {
                let (cols, rows) = stamp(t, out.seed);
                let rows: Vec<Value> = rows
                    .iter()
                    .map(|r| Value::Object(cols.iter().cloned().zip(r.iter().map(Cell::json)).collect()))
                    .collect();
                tables.insert(t.name.clone(), Value::Array(rows));
            }
            let doc = serde_json::json!({
                "experiment": out.experiment,
                "seed": out.seed,
                "version": crate::VERSION,
                "tables": tables,
                "details": out.details,
            });
            files.push(("results.json".into(), pretty(&doc)));
        }
    }
    files.push((RESOLVED_CONFIG_FILE.into(), cfg.to_json_string().into_bytes()));
    Ok(files)
}

fn pretty(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s.into_bytes()
}

/// Writes the outcome into `dir` (created if needed) and returns the paths.
pub fn write_outcome(cfg: &ExperimentConfig, out: &Outcome, dir: &Path) -> Result<Vec<PathBuf>> {
    let files = render(cfg, out)?;
    fs::create_dir_all(dir)?;
    let mut paths = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let p = dir.join(name);
        fs::write(&p, bytes)?;
        paths.push(p);
    }
    Ok(paths)
}

/// Runs the config and writes its results to `cfg.output.path`.
pub fn run_and_write(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let out = run(cfg)?;
    write_outcome(cfg, &out, Path::new(&cfg.output.path))
}
