//! Deterministic serialization helpers.
//!
//! JSON documents are written with every float at 17 significant digits
//! (enough for a bit-exact `f64` round trip) and with object keys in sorted
//! order, so identical inputs produce identical bytes.  CSV cells carry 12
//! significant digits.

use crate::error::{Error, Result};
use serde_json::Value;

/// 17 significant digits: one leading digit plus 16 after the point.
pub fn fmt_f64_17(v: f64) -> String {
    format!("{v:.16e}")
}

/// 12 significant digits, used for CSV cells.
pub fn fmt_f64_12(v: f64) -> String {
    format!("{v:.11e}")
}

/// Render a JSON value with deterministic layout and 17-digit floats.
///
/// Rejects non-finite numbers: they have no JSON representation and the
/// library never puts them into reports.
pub fn to_json_g17(value: &Value) -> Result<String> {
    let mut out = String::new();
    write_value(&mut out, value, 0)?;
    out.push('\n');
    Ok(out)
}

fn write_value(out: &mut String, value: &Value, indent: usize) -> Result<()> {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                out.push_str(&i.to_string());
            } else if let Some(u) = n.as_u64() {
                out.push_str(&u.to_string());
            } else {
                let f = n
                    .as_f64()
                    .ok_or_else(|| Error::internal("unrepresentable JSON number"))?;
                if !f.is_finite() {
                    return Err(Error::internal("non-finite float in JSON output"));
                }
                out.push_str(&fmt_f64_17(f));
            }
        }
        Value::String(s) => {
            out.push_str(&serde_json::to_string(s)?);
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
            } else {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    write_value(out, item, indent + 1)?;
                }
                out.push('\n');
                push_indent(out, indent);
                out.push(']');
            }
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
            } else {
                out.push('{');
                for (i, (key, item)) in map.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    out.push('\n');
                    push_indent(out, indent + 1);
                    out.push_str(&serde_json::to_string(key)?);
                    out.push_str(": ");
                    write_value(out, item, indent + 1)?;
                }
                out.push('\n');
                push_indent(out, indent);
                out.push('}');
            }
        }
    }
    Ok(())
}

fn push_indent(out: &mut String, indent: usize) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}
