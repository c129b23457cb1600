//! Human-readable number formatting and provenance helpers.

use serde::Serialize;
use serde_json::{json, Value};

/// Six significant digits, trailing zeros trimmed, like C's `%g`.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_zeros(&s)
    } else {
        let s = format!("{x:.5e}");
        let (mantissa, e) = s.split_once('e').expect("exponent format");
        format!("{}e{e}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn opt6(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_else(|| "undefined".to_string())
}

/// Self-describing provenance embedded in every artifact: the command, its
/// resolved flags and configuration.
pub fn provenance<A: Serialize, C: Serialize>(command: &str, args: &A, config: Option<&C>) -> Value {
    let mut p = json!({
        "tool": "decayrnn",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "args": args,
    });
    if let Some(c) = config {
        p["config"] = json!(c);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(18838.0), "18838");
        assert_eq!(sig6(0.75), "0.75");
        assert_eq!(sig6(0.5567699), "0.55677");
        assert_eq!(sig6(1.23456789e-7), "1.23457e-7");
        assert_eq!(sig6(123456789.0), "1.23457e8");
        assert_eq!(sig6(-2.0 / 3.0), "-0.666667");
        assert_eq!(sig6(0.0), "0");
    }
}
