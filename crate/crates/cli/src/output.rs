//! Output documents. serde_json keeps object keys sorted and prints floats in shortest round-trip form.

use serde::Serialize;
use serde_json::{json, Map, Value};

use mdk::{MdkError, Result};

use crate::Format;

pub fn value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| MdkError::Numerical(format!("serializing output: {e}")))
}

pub fn envelope(command: &str, config: Value, format: Format, seed: u64, result: Value) -> Value {
    let mut cfg = match config {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("args".into(), other);
            m
        }
    };
    cfg.insert("command".into(), json!(command));
    cfg.insert("format".into(), json!(format));
    cfg.insert("seed".into(), json!(seed));
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config": cfg,
        "result": result,
    })
}

pub fn json(doc: &Value) -> String {
    serde_json::to_string_pretty(doc).expect("a Value always serializes")
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        Value::String(s) => out.push((prefix.into(), s.clone())),
        Value::Null => out.push((prefix.into(), String::new())),
        other => out.push((prefix.into(), other.to_string())),
    }
}

fn field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One key,value row per leaf, keys as dotted paths with [i] for array entries.
pub fn csv(doc: &Value) -> String {
    let mut rows = Vec::new();
    flatten("", doc, &mut rows);
    let mut text = String::from("key,value");
    for (k, v) in rows {
        text.push('\n');
        text.push_str(&field(&k));
        text.push(',');
        text.push_str(&field(&v));
    }
    text
}
