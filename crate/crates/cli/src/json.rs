//! Deterministic JSON emission.
//!
//! Keys come out sorted (serde_json's default map is ordered), integers are
//! printed as integers and every float with 17 significant digits, so that
//! repeated runs produce byte-identical output.

use std::fmt::Write;

use momsos_core::scan::format_float;
use serde::Serialize;
use serde_json::Value;

/// Renders `value` as indented JSON followed by a newline.
pub fn to_string<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    emit(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn emit(v: &Value, level: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                // serde_json numbers are always finite.
                out.push_str(&format_float(n.as_f64().unwrap_or(0.0)));
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            // Short numeric vectors stay on one line.
            if items.len() <= 8 && items.iter().all(|x| x.is_number() || x.is_null()) {
                out.push('[');
                for (k, x) in items.iter().enumerate() {
                    if k > 0 {
                        out.push_str(", ");
                    }
                    emit(x, level, out);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (k, x) in items.iter().enumerate() {
                indent(level + 1, out);
                emit(x, level + 1, out);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            indent(level, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (k, (key, x)) in map.iter().enumerate() {
                indent(level + 1, out);
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                emit(x, level + 1, out);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            indent(level, out);
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_keep_17_digits_and_keys_sort() {
        let s = to_string(&json!({"b": 0.1, "a": 3, "c": [1.5, null]})).unwrap();
        assert_eq!(s, "{\n  \"a\": 3,\n  \"b\": 1.0000000000000001e-1,\n  \"c\": [1.5000000000000000e0, null]\n}\n");
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"].as_f64(), Some(0.1));
    }

    #[test]
    fn nested_containers_indent() {
        let s = to_string(&json!({"m": [[1, 2], [3, 4]], "e": {}})).unwrap();
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back, json!({"m": [[1, 2], [3, 4]], "e": {}}));
    }
}
