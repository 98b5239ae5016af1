//! Report envelope and a deterministic JSON writer.
//!
//! Field order follows struct declaration order (serde_json keeps insertion
//! order), floats are written with 17 significant digits in exponent form
//! and non-finite floats become `null`.

use serde::Serialize;
use serde_json::{Map, Number, Value};

use crate::CliError;

pub const TOOL_NAME: &str = "ibvp";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Build the common envelope around a command result.
pub fn envelope(
    command: &str,
    config_name: Option<&str>,
    config_hash: &str,
    metadata: &Value,
    result: Value,
) -> Value {
    let mut m = Map::new();
    m.insert("tool".into(), Value::String(TOOL_NAME.into()));
    m.insert("version".into(), Value::String(TOOL_VERSION.into()));
    m.insert("command".into(), Value::String(command.into()));
    m.insert(
        "config_name".into(),
        config_name.map_or(Value::Null, |s| Value::String(s.into())),
    );
    m.insert("config_hash".into(), Value::String(config_hash.into()));
    m.insert("metadata".into(), metadata.clone());
    m.insert("result".into(), result);
    Value::Object(m)
}

pub fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Report(e.to_string()))
}

/// `{:.16e}` for floats, plain digits for integers.
pub fn format_number(n: &Number) -> String {
    if let Some(i) = n.as_i64() {
        return i.to_string();
    }
    if let Some(u) = n.as_u64() {
        return u.to_string();
    }
    match n.as_f64() {
        Some(f) if f.is_finite() => format_float(f),
        _ => "null".into(),
    }
}

pub fn format_float(f: f64) -> String {
    if f.is_finite() {
        format!("{f:.16e}")
    } else {
        "null".into()
    }
}

fn write_string(out: &mut String, s: &str) {
    out.push_str(&serde_json::to_string(s).expect("strings always serialize"));
}

fn write_value(out: &mut String, v: &Value, indent: usize) {
    let pad = |out: &mut String, n: usize| out.extend(std::iter::repeat_n(' ', n));
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => out.push_str(&format_number(n)),
        Value::String(s) => write_string(out, s),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, indent + 2);
                write_value(out, item, indent + 2);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            for (i, (k, item)) in map.iter().enumerate() {
                pad(out, indent + 2);
                write_string(out, k);
                out.push_str(": ");
                write_value(out, item, indent + 2);
                if i + 1 < map.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

/// Render `v` as indented JSON with a trailing newline.
pub fn render(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

/// A flat table written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(f) if f.is_finite() => format_float(*f),
            Cell::Num(f) if f.is_nan() => "nan".into(),
            Cell::Num(f) if *f > 0.0 => "inf".into(),
            Cell::Num(_) => "-inf".into(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl Table {
    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let err = |e: csv::Error| CliError::Report(e.to_string());
        w.write_record(&self.header).map_err(err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Report(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Report(e.to_string()))
    }

    /// Rows as JSON objects keyed by the header.
    pub fn to_value(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let mut m = Map::new();
                    for (h, c) in self.header.iter().zip(row) {
                        let v = match c {
                            Cell::Num(f) => Number::from_f64(*f).map_or(Value::Null, Value::Number),
                            Cell::Text(s) if s.is_empty() => Value::Null,
                            Cell::Text(s) => Value::String(s.clone()),
                        };
                        m.insert((*h).to_string(), v);
                    }
                    Value::Object(m)
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_use_seventeen_significant_digits() {
        let v = json!({"a": 0.1, "b": 3, "c": -2.5e-300, "d": [true, null, "x"]});
        let s = render(&v);
        assert!(s.contains("\"a\": 1.0000000000000001e-1"), "{s}");
        assert!(s.contains("\"b\": 3"));
        assert!(s.contains("\"c\": -2.5000000000000000e-300"), "{s}");
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
        assert_eq!(back["c"].as_f64(), Some(-2.5e-300));
    }

    #[test]
    fn non_finite_floats_become_null() {
        #[derive(Serialize)]
        struct S {
            a: f64,
            b: f64,
        }
        let v = to_value(&S {
            a: f64::NAN,
            b: f64::INFINITY,
        })
        .unwrap();
        assert_eq!(render(&v), "{\n  \"a\": null,\n  \"b\": null\n}\n");
    }

    #[test]
    fn field_order_is_preserved() {
        #[derive(Serialize)]
        struct S {
            zeta: u8,
            alpha: u8,
        }
        let s = render(&to_value(&S { zeta: 1, alpha: 2 }).unwrap());
        assert!(s.find("zeta").unwrap() < s.find("alpha").unwrap());
    }

    #[test]
    fn envelope_carries_hash_and_version() {
        let v = envelope("solve", Some("demo"), "sha256:00", &Value::Null, json!({}));
        assert_eq!(v["version"], TOOL_VERSION);
        assert_eq!(v["config_hash"], "sha256:00");
        let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
        assert_eq!(keys[0], "tool");
    }

    #[test]
    fn csv_layout() {
        let t = Table {
            header: vec!["t", "side", "x"],
            rows: vec![
                vec![Cell::Num(0.5), Cell::Text("left".into()), Cell::Num(1.0)],
                vec![
                    Cell::Num(0.5),
                    Cell::Text("right".into()),
                    Cell::Num(f64::INFINITY),
                ],
            ],
        };
        assert_eq!(
            t.to_csv().unwrap(),
            "t,side,x\n5.0000000000000000e-1,left,1.0000000000000000e0\n5.0000000000000000e-1,right,inf\n"
        );
    }
}
