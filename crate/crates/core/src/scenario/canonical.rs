//! Byte-stable JSON: sorted keys, two-space indent, floats at six decimals.

use serde::Serialize;
use serde_json::Value;

pub const FLOAT_DECIMALS: usize = 6;

pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn format_float(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    let s = format!("{x:.FLOAT_DECIMALS$}");
    // -0.000000 and 0.000000 are the same document
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn pad(out: &mut String, n: usize) {
    out.extend(std::iter::repeat_n(' ', n));
}

fn write_value(v: &Value, indent: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) => out.push_str(&u.to_string()),
            (_, Some(i), _) => out.push_str(&i.to_string()),
            (_, _, Some(f)) => out.push_str(&format_float(f)),
            _ => out.push_str("null"),
        },
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(out, indent + 2);
                write_value(item, indent + 2, out);
                out.push_str(if i + 1 < items.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                pad(out, indent + 2);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(&map[*k], indent + 2, out);
                out.push_str(if i + 1 < keys.len() { ",\n" } else { "\n" });
            }
            pad(out, indent);
            out.push('}');
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn sorted_keys_and_fixed_precision() {
        let v = json!({"b": 1.5, "a": [1, -2, 0.1234567], "c": {}, "d": [], "e": null, "f": "x\"y"});
        let s = to_canonical_json(&v).unwrap();
        assert_eq!(
            s,
            "{\n  \"a\": [\n    1,\n    -2,\n    0.123457\n  ],\n  \"b\": 1.500000,\n  \"c\": {},\n  \"d\": [],\n  \"e\": null,\n  \"f\": \"x\\\"y\"\n}\n"
        );
    }

    #[test]
    fn negative_zero_is_normalized() {
        assert_eq!(format_float(-0.0), "0.000000");
        assert_eq!(format_float(-1e-9), "0.000000");
        assert_eq!(format_float(-0.5), "-0.500000");
        assert_eq!(format_float(f64::NAN), "null");
    }

    #[test]
    fn reparse_is_stable() {
        let v = json!({"x": 1.0 / 3.0, "y": 2.0});
        let a = to_canonical_json(&v).unwrap();
        let back: Value = serde_json::from_str(&a).unwrap();
        assert_eq!(to_canonical_json(&back).unwrap(), a);
    }
}
