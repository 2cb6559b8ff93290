use std::fmt::Write as _;
use std::str::FromStr;

use serde_json::{Map, Number, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A single output cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<i64> for Cell {
    fn from(x: i64) -> Self {
        Cell::Int(x)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

/// 17 significant digits, enough to round-trip any double.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn json_float(x: f64) -> Value {
    if x.is_finite() {
        Value::Number(Number::from_str(&fmt_float(x)).expect("formatted float parses"))
    } else {
        Value::String(fmt_float(x))
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => fmt_float(*x),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(i) => Value::from(*i),
            Cell::Float(x) => json_float(*x),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    Table(Table),
    Object(Map<String, Value>),
}

/// Provenance carried in every output.
#[derive(Debug, Clone, PartialEq)]
pub struct Meta {
    pub command: &'static str,
    pub config: String,
    pub seed: Option<u64>,
}

fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

pub fn render(meta: &Meta, body: &Body, format: Format) -> String {
    match format {
        Format::Csv => render_csv(meta, body),
        Format::Json => {
            let mut out = serde_json::to_string_pretty(&render_json(meta, body)).expect("json serializes");
            out.push('\n');
            out
        }
    }
}

fn render_csv(meta: &Meta, body: &Body) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# gelation {}", version());
    let _ = writeln!(out, "# command: {}", meta.command);
    let _ = writeln!(out, "# config: {}", meta.config);
    if let Some(seed) = meta.seed {
        let _ = writeln!(out, "# seed: {seed}");
    }
    match body {
        Body::Table(t) => {
            out.push_str(&t.columns.join(","));
            out.push('\n');
            for row in &t.rows {
                let cells: Vec<String> = row.iter().map(Cell::csv).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
        }
        Body::Object(map) => {
            out.push_str("key,value\n");
            let mut flat = Vec::new();
            flatten("", &Value::Object(map.clone()), &mut flat);
            for (k, v) in flat {
                let _ = writeln!(out, "{k},{v}");
            }
        }
    }
    out
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, v)| flatten(&key(k), v, out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| flatten(&key(&i.to_string()), v, out)),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn render_json(meta: &Meta, body: &Body) -> Value {
    let mut m = Map::new();
    m.insert("version".into(), version().into());
    m.insert("command".into(), meta.command.into());
    m.insert("config".into(), meta.config.clone().into());
    if let Some(seed) = meta.seed {
        m.insert("seed".into(), seed.into());
    }
    let mut top = Map::new();
    top.insert("meta".into(), Value::Object(m));
    match body {
        Body::Table(t) => {
            top.insert("columns".into(), t.columns.iter().map(|c| Value::from(c.as_str())).collect());
            let rows = t.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
            top.insert("rows".into(), Value::Array(rows));
        }
        Body::Object(map) => top.extend(map.clone()),
    }
    Value::Object(top)
}
