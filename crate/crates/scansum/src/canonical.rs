//! Byte-stable JSON emission.
//!
//! All JSON the pipeline writes goes through this writer: object keys are
//! sorted (serde_json's default `Map` is a `BTreeMap`) and layout is fixed
//! two-space pretty printing, so emitting the same value twice yields
//! identical bytes on any platform.
//!
//! Two float styles exist. Human-facing reports use fixed six-decimal
//! formatting (values are pre-rounded with [`round6`] so parsing an
//! emitted report reproduces it exactly). Machine artifacts — manifests,
//! synthesis specs, equation tables, ground truth — use the shortest
//! round-trip representation so no precision is lost.

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FloatStyle {
    Shortest,
    Fixed6,
}

/// Round to six decimal places. Values stored in reports are pre-rounded
/// so that `parse(emit(report)) == report` holds exactly.
pub fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Canonical JSON with lossless float formatting (trailing newline
/// included).
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    render(value, FloatStyle::Shortest)
}

/// Canonical JSON with fixed six-decimal floats, for reports.
pub fn to_canonical_json_fixed6<T: Serialize>(value: &T) -> Result<String> {
    render(value, FloatStyle::Fixed6)
}

pub fn write_canonical_json<T: Serialize>(path: &std::path::Path, value: &T) -> Result<()> {
    write_text(path, to_canonical_json(value)?)
}

pub fn write_canonical_json_fixed6<T: Serialize>(path: &std::path::Path, value: &T) -> Result<()> {
    write_text(path, to_canonical_json_fixed6(value)?)
}

fn write_text(path: &std::path::Path, text: String) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn render<T: Serialize>(value: &T, style: FloatStyle) -> Result<String> {
    let v = serde_json::to_value(value)
        .map_err(|e| Error::InvalidValue(format!("serializing to JSON: {e}")))?;
    let mut out = String::new();
    write_value(&mut out, &v, 0, style);
    out.push('\n');
    Ok(out)
}

fn write_value(out: &mut String, v: &Value, indent: usize, style: FloatStyle) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() && style == FloatStyle::Fixed6 {
                // n is finite by construction (serde_json rejects NaN/Inf)
                out.push_str(&format!("{:.6}", n.as_f64().unwrap()));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serialization"));
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                push_indent(out, indent + 1);
                write_value(out, item, indent + 1, style);
            }
            out.push('\n');
            push_indent(out, indent);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (i, (k, item)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                push_indent(out, indent + 1);
                out.push_str(&serde_json::to_string(k).expect("key serialization"));
                out.push_str(": ");
                write_value(out, item, indent + 1, style);
            }
            out.push('\n');
            push_indent(out, indent);
            out.push('}');
        }
    }
}

fn push_indent(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}
