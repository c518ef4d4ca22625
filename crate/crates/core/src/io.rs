//! Deterministic JSON output.

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Significant digits kept for every float in a report.
pub const REPORT_DIGITS: usize = 12;

fn round_sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{:.*e}", REPORT_DIGITS - 1, v).parse().unwrap_or(v)
}

fn canonicalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let f = round_sig(n.as_f64().unwrap());
            serde_json::Number::from_f64(f).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(canonicalize).collect()),
        // serde_json's default map is ordered by key.
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, canonicalize(v))).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted keys and floats rounded to [`REPORT_DIGITS`]
/// significant digits, so equal inputs give byte-identical files.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| Error::InvalidConfig(format!("serialization failed: {e}")))?;
    let mut s = serde_json::to_string_pretty(&canonicalize(v))
        .map_err(|e| Error::InvalidConfig(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_sorted_and_floats_rounded() {
        #[derive(Serialize)]
        struct R {
            zeta: f64,
            alpha: f64,
        }
        let s = to_canonical_json(&R { zeta: 0.1 + 0.2, alpha: 1.0 }).unwrap();
        assert!(s.find("alpha").unwrap() < s.find("zeta").unwrap());
        assert!(s.contains("0.3"));
        assert!(!s.contains("0.30000000000000004"));
    }
}
