//! Byte-stable emitters: sorted-key JSON with 17 significant digits, and CSV tables.

use std::fmt::Write as _;

use serde_json::Value;

/// Marker written in place of a missing (`null`) report field.
pub const UNAVAILABLE: &str = "unavailable";

pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        // keep the sign-free spelling so that 0.0 and -0.0 agree
        return "0.0000000000000000e0".into();
    }
    format!("{x:.16e}")
}

fn write_string(out: &mut String, s: &str) {
    out.push_str(&serde_json::to_string(s).expect("strings serialize"));
}

fn write_value(out: &mut String, v: &Value, indent: usize, null_marker: Option<&str>) {
    let pad = |n: usize| "  ".repeat(n);
    match v {
        Value::Null => match null_marker {
            Some(m) => write_string(out, m),
            None => out.push_str("null"),
        },
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                write!(out, "{i}").unwrap();
            } else if let Some(u) = n.as_u64() {
                write!(out, "{u}").unwrap();
            } else {
                out.push_str(&format_float(n.as_f64().expect("finite number")));
            }
        }
        Value::String(s) => write_string(out, s),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_value(out, item, indent + 1, null_marker);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (k, key) in keys.iter().enumerate() {
                out.push_str(&pad(indent + 1));
                write_string(out, key);
                out.push_str(": ");
                write_value(out, &map[*key], indent + 1, null_marker);
                out.push_str(if k + 1 < keys.len() { ",\n" } else { "\n" });
            }
            out.push_str(&pad(indent));
            out.push('}');
        }
    }
}

/// Report JSON: missing values become `"unavailable"`.
pub fn report_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0, Some(UNAVAILABLE));
    out.push('\n');
    out
}

/// Plain stable JSON (used for canonical configs).
pub fn stable_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0, None);
    out.push('\n');
    out
}

/// One CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

pub fn num(x: f64) -> String {
    if x.is_finite() {
        format_float(x)
    } else if x.is_nan() {
        UNAVAILABLE.into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| UNAVAILABLE.into(), num)
}
