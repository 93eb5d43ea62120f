//! Normalized JSON text: sorted keys, floats with 17 significant digits.
//!
//! Parsing normalized text and writing it again reproduces it byte for byte,
//! so instance and report files diff cleanly.

use serde_json::Value;

pub fn to_text(v: &Value, pretty: bool) -> String {
    let mut out = String::new();
    write_value(v, pretty, 0, &mut out);
    out.push('\n');
    out
}

/// `x` in exponent form with 17 significant digits; non-finite values are
/// null and negative zero is written as zero.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        "0.0000000000000000e0".to_string()
    } else if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn newline(pretty: bool, depth: usize, out: &mut String) {
    if pretty {
        out.push('\n');
        out.push_str(&"  ".repeat(depth));
    }
}

/// Arrays whose items are all scalars stay on one line when pretty printing.
fn is_flat(items: &[Value]) -> bool {
    items.iter().all(|x| !matches!(x, Value::Array(_) | Value::Object(_)))
}

fn write_value(v: &Value, pretty: bool, depth: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_float(n.as_f64().unwrap_or(f64::NAN)));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            let flat = is_flat(items);
            out.push('[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                    if pretty && flat {
                        out.push(' ');
                    }
                }
                if !flat {
                    newline(pretty, depth + 1, out);
                }
                write_value(item, pretty, depth + 1, out);
            }
            if !flat && !items.is_empty() {
                newline(pretty, depth, out);
            }
            out.push(']');
        }
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (k, key) in keys.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                newline(pretty, depth + 1, out);
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push(':');
                if pretty {
                    out.push(' ');
                }
                write_value(&map[key.as_str()], pretty, depth + 1, out);
            }
            if !map.is_empty() {
                newline(pretty, depth, out);
            }
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_keep_seventeen_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        assert_eq!(format_float(-0.5), "-5.0000000000000000e-1");
        assert_eq!(format_float(f64::INFINITY), "null");
        assert_eq!(format_float(-0.0), "0.0000000000000000e0");
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02e23, f64::MIN_POSITIVE] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn keys_are_sorted_and_text_is_stable() {
        let v = json!({"b": [1.5, 2], "a": {"z": true, "y": null}});
        let compact = to_text(&v, false);
        assert_eq!(compact, "{\"a\":{\"y\":null,\"z\":true},\"b\":[1.5000000000000000e0,2]}\n");
        for pretty in [false, true] {
            let text = to_text(&v, pretty);
            let back: Value = serde_json::from_str(&text).unwrap();
            assert_eq!(to_text(&back, pretty), text);
        }
    }
}
