//! CSV and JSON emission.

use std::io::Write;

use serde_json::{Map, Value};

use crate::config::{Format, RunConfig};
use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    U(u64),
    B(bool),
    S(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::F(x) => format!("{x:.16e}"),
            Cell::U(x) => x.to_string(),
            Cell::B(x) => x.to_string(),
            Cell::S(x) => x.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(x) => serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number),
            Cell::U(x) => Value::from(*x),
            Cell::B(x) => Value::from(*x),
            Cell::S(x) => Value::from(x.as_str()),
        }
    }
}

/// Named columns and rows in grid order.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra top-level JSON fields.
    pub extra: Map<String, Value>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            ..Self::default()
        }
    }
}

pub fn render(table: &Table, cfg: &RunConfig) -> Result<Vec<u8>, CliError> {
    let hash = cfg.hash();
    match cfg.format {
        Format::Csv => {
            let mut buf = Vec::new();
            writeln!(buf, "# qmet {VERSION} command={} config_sha256={hash}", cfg.command).expect("in-memory write");
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(buf);
            let io = |e: csv::Error| CliError::Config(format!("csv encoding: {e}"));
            w.write_record(&table.columns).map_err(io)?;
            for row in &table.rows {
                w.write_record(row.iter().map(Cell::csv)).map_err(io)?;
            }
            w.into_inner().map_err(|e| CliError::Config(format!("csv encoding: {e}")))
        }
        Format::Json => {
            let records: Vec<Value> = table
                .rows
                .iter()
                .map(|row| {
                    Value::Object(
                        table
                            .columns
                            .iter()
                            .zip(row)
                            .map(|(c, v)| (c.to_string(), v.json()))
                            .collect(),
                    )
                })
                .collect();
            let mut doc = Map::new();
            doc.insert("qmet_version".into(), VERSION.into());
            doc.insert("command".into(), cfg.command.clone().into());
            doc.insert("config_sha256".into(), hash.into());
            doc.insert("columns".into(), table.columns.clone().into());
            doc.insert("records".into(), records.into());
            for (k, v) in &table.extra {
                doc.insert(k.clone(), v.clone());
            }
            let mut out = serde_json::to_vec_pretty(&Value::Object(doc)).expect("json serializes");
            out.push(b'\n');
            Ok(out)
        }
    }
}

pub fn emit(table: &Table, cfg: &RunConfig) -> Result<(), CliError> {
    let bytes = render(table, cfg)?;
    match &cfg.out {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| CliError::Config(format!("cannot write '{path}': {e}"))),
        None => std::io::stdout()
            .write_all(&bytes)
            .map_err(|e| CliError::Config(format!("cannot write to stdout: {e}"))),
    }
}
