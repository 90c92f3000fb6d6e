use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

/// Output of one command: effective configuration, one row per item, and
/// aggregate results.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config: Value,
    pub rows: Vec<Value>,
    pub summary: Value,
    /// Wall-clock seconds; only present when requested, since it breaks
    /// byte-for-byte reproducibility.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Compact JSON with every float written as 17 significant digits.
struct Sig17;

impl Formatter for Sig17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(sig17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

pub fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn to_json_string<T: Serialize>(v: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    v.serialize(&mut ser).expect("report values serialize");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

impl Report {
    pub fn new(command: &str, config: impl Serialize, rows: Vec<Value>, summary: Value) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            config: serde_json::to_value(config).expect("config serializes"),
            rows,
            summary,
            timing: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = to_json_string(self);
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Rows as CSV; columns are the sorted union of row keys, nested values
    /// are written as JSON.
    pub fn to_csv(&self) -> String {
        let mut cols: Vec<String> = Vec::new();
        for row in &self.rows {
            if let Value::Object(m) = row {
                for k in m.keys() {
                    if !cols.contains(k) {
                        cols.push(k.clone());
                    }
                }
            }
        }
        cols.sort();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&cols).expect("in-memory write");
        for row in &self.rows {
            let rec: Vec<String> = cols.iter().map(|c| cell(row.get(c).unwrap_or(&Value::Null))).collect();
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) if n.is_f64() => sig17(n.as_f64().unwrap()),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        other => to_json_string(other),
    }
}
