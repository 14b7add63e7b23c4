use std::collections::BTreeMap;

use serde_json::{json, Map, Value as Json};

use super::config::{Command, Format};
use super::CliError;

/// One output cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Num(f64),
    Int(i64),
    Bool(bool),
    Str(String),
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}

impl From<usize> for Value {
    fn from(x: usize) -> Self {
        Value::Int(x as i64)
    }
}

impl From<i64> for Value {
    fn from(x: i64) -> Self {
        Value::Int(x)
    }
}

impl From<bool> for Value {
    fn from(x: bool) -> Self {
        Value::Bool(x)
    }
}

impl From<&str> for Value {
    fn from(x: &str) -> Self {
        Value::Str(x.to_string())
    }
}

impl From<String> for Value {
    fn from(x: String) -> Self {
        Value::Str(x)
    }
}

impl Value {
    /// 17 significant digits for floats.
    fn csv_cell(&self) -> String {
        match self {
            Value::Num(x) if x.is_finite() => format!("{x:.16e}"),
            Value::Num(x) => x.to_string(),
            Value::Int(i) => i.to_string(),
            Value::Bool(b) => b.to_string(),
            Value::Str(s) => s.clone(),
        }
    }

    /// JSON has no non-finite numbers; those become strings.
    fn json(&self) -> Json {
        match self {
            Value::Num(x) if x.is_finite() => json!(x),
            Value::Num(x) => Json::String(x.to_string()),
            Value::Int(i) => json!(i),
            Value::Bool(b) => json!(b),
            Value::Str(s) => json!(s),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(x) => Some(*x),
            Value::Int(i) => Some(*i as f64),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[k]).collect())
    }
}

/// Result of one command. Everything here is a pure function of the
/// configuration; wall time is reported separately.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRecord {
    pub command: Command,
    pub config_hash: String,
    pub tool_version: &'static str,
    pub table: Table,
}

impl ResultRecord {
    pub fn body(&self, format: Format) -> Result<Vec<u8>, CliError> {
        match format {
            Format::Csv => self.csv(),
            Format::Json => Ok(self.json()),
        }
    }

    fn csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::numeric("output", e.to_string());
        w.write_record(&self.table.columns).map_err(fail)?;
        for row in &self.table.rows {
            w.write_record(row.iter().map(Value::csv_cell)).map_err(fail)?;
        }
        w.into_inner().map_err(|e| CliError::numeric("output", e.to_string()))
    }

    fn json(&self) -> Vec<u8> {
        let rows: Vec<Json> = self
            .table
            .rows
            .iter()
            .map(|r| {
                let obj: BTreeMap<&str, Json> = self
                    .table
                    .columns
                    .iter()
                    .map(String::as_str)
                    .zip(r.iter().map(Value::json))
                    .collect();
                json!(obj)
            })
            .collect();
        let mut top = Map::new();
        top.insert("columns".into(), json!(self.table.columns));
        top.insert("command".into(), json!(self.command.as_str()));
        top.insert("config_hash".into(), json!(self.config_hash));
        top.insert("rows".into(), Json::Array(rows));
        top.insert("tool_version".into(), json!(self.tool_version));
        let mut out = serde_json::to_vec_pretty(&Json::Object(top)).expect("JSON serialization");
        out.push(b'\n');
        out
    }

    /// Metadata written next to the body (`<out>.meta.json`).
    pub fn metadata(&self, wall_time_s: f64, threads: usize) -> Vec<u8> {
        let meta = json!({
            "command": self.command.as_str(),
            "config_hash": self.config_hash,
            "threads": threads,
            "tool_version": self.tool_version,
            "wall_time_s": wall_time_s,
        });
        let mut out = serde_json::to_vec_pretty(&meta).expect("JSON serialization");
        out.push(b'\n');
        out
    }
}
