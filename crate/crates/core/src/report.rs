//! Deterministic JSON output: floats are rounded to 12 significant digits
//! so that reruns produce byte-identical reports.

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

pub const SIGNIFICANT_DIGITS: usize = 12;

pub fn round_significant(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

/// Rounds every float in `v` in place. Integers are left untouched.
pub fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().unwrap(), SIGNIFICANT_DIGITS);
            if let Some(r) = serde_json::Number::from_f64(x) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

pub fn to_value<T: Serialize>(report: &T) -> Result<Value> {
    let mut v = serde_json::to_value(report).map_err(|e| Error::InvalidInput(e.to_string()))?;
    round_value(&mut v);
    Ok(v)
}

/// Pretty-printed JSON with rounded floats and a trailing newline.
pub fn to_json_string<T: Serialize>(report: &T) -> Result<String> {
    let v = to_value(report)?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::InvalidInput(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn rounds_floats_only() {
        let mut v = json!({"a": 0.1 + 0.2, "b": [1, 2.000000000000004], "c": "x", "d": -3});
        round_value(&mut v);
        assert_eq!(v, json!({"a": 0.3, "b": [1, 2.0], "c": "x", "d": -3}));
        assert_eq!(round_significant(123456.7890123456, 12), 123456.789012);
        assert!(round_significant(f64::NAN, 12).is_nan());
    }
}
