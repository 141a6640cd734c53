//! CSV tables with a `#` metadata header, plus JSON sidecars.

use crate::config::ExperimentConfig;
use crate::error::CliError;
use serde_json::{json, Value};
use std::io::Write;
use std::path::{Path, PathBuf};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl Cell {
    /// Floats carry 17 significant digits so they round-trip exactly.
    pub fn render(&self) -> String {
        match self {
            Cell::F(x) => format!("{x:.16e}"),
            Cell::I(i) => i.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::I(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::I(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::S(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::S(s)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let k = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| &r[k]).collect())
    }
}

/// Everything an experiment produces.
#[derive(Debug, Clone)]
pub struct Report {
    pub table: Table,
    pub summary: Value,
}

#[derive(Debug, Clone)]
pub struct Written {
    pub csv: PathBuf,
    pub json: PathBuf,
}

fn metadata(cfg: &ExperimentConfig) -> [(&'static str, String); 4] {
    [
        ("version", VERSION.to_string()),
        ("experiment", cfg.experiment.clone()),
        ("config_sha256", cfg.hash()),
        ("seed", cfg.seed.to_string()),
    ]
}

pub fn render_csv(cfg: &ExperimentConfig, table: &Table) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    for (k, v) in metadata(cfg) {
        writeln!(buf, "# {k}: {v}")?;
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(&table.columns)?;
        for row in &table.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
    }
    Ok(buf)
}

pub fn sidecar(cfg: &ExperimentConfig, summary: &Value) -> Value {
    let mut meta = serde_json::Map::new();
    for (k, v) in metadata(cfg) {
        meta.insert(k.to_string(), Value::String(v));
    }
    json!({
        "metadata": meta,
        "config": cfg,
        "summary": summary,
    })
}

/// Writes `<output_dir>/<experiment>.csv` and `.json`.
pub fn write_report(cfg: &ExperimentConfig, report: &Report) -> Result<Written, CliError> {
    let dir: &Path = &cfg.output_dir;
    std::fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{}.csv", cfg.experiment));
    let json = dir.join(format!("{}.json", cfg.experiment));
    std::fs::write(&csv, render_csv(cfg, &report.table)?)?;
    let mut text = serde_json::to_string_pretty(&sidecar(cfg, &report.summary))
        .map_err(|e| CliError::Invalid(format!("summary does not serialize: {e}")))?;
    text.push('\n');
    std::fs::write(&json, text)?;
    Ok(Written { csv, json })
}

/// The CSV without its `#` metadata lines.
pub fn csv_body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt() * 1e-300, -7.25e12] {
            let s = Cell::F(x).render();
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn header_then_body() {
        let cfg = ExperimentConfig::new("demo");
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![Cell::F(0.5), "x,y".into()]);
        let text = String::from_utf8(render_csv(&cfg, &t).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], format!("# version: {VERSION}"));
        assert!(lines[2].starts_with("# config_sha256: "));
        assert_eq!(lines[4], "a,b");
        assert_eq!(lines[5], "5.0000000000000000e-1,\"x,y\"");
        assert_eq!(csv_body(&text), "a,b\n5.0000000000000000e-1,\"x,y\"\n");
    }
}
