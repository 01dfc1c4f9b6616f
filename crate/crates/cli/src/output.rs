//! Run records and their CSV / JSON rendering.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Columns carry their unit in the name, e.g. `t [hbar/E]`.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_digest: String,
    pub seeds: Vec<u64>,
    pub wall_time_s: f64,
    pub parameters: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<Value>,
    pub outputs: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<Table>,
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn scalar_lines(prefix: &str, v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                scalar_lines(&key, v, out);
            }
        }
        Value::Array(_) => {}
        other => out.push(format!("# {prefix}: {}", cell(other))),
    }
}

pub fn render(record: &RunRecord, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(record)? + "\n"),
        Format::Csv => {
            let mut lines = vec![
                format!("# {} {}", record.tool, record.version),
                format!("# command: {}", record.command),
                format!("# config_digest: {}", record.config_digest),
                format!(
                    "# seeds: {}",
                    record.seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
                ),
                format!("# wall_time_s: {}", record.wall_time_s),
            ];
            scalar_lines("", &record.outputs, &mut lines);
            let mut text = lines.join("\n") + "\n";
            if let Some(table) = &record.table {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&table.columns)?;
                for row in &table.rows {
                    w.write_record(row.iter().map(cell))?;
                }
                text.push_str(&String::from_utf8(w.into_inner()?)?);
            }
            Ok(text)
        }
    }
}

pub fn emit(record: &RunRecord, format: Format, out: Option<&Path>) -> Result<()> {
    let text = render(record, format)?;
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
                // A closed pipe (e.g. `| head`) is not an error of the run.
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
                other => Ok(other?),
            }
        }
    }
}
