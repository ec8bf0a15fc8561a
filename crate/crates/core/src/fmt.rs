//! printf-style number formatting for the text exchange formats.
//!
//! Rust's `{:e}` writes `1.5e-3`; the TSV and JSONL artifacts use the C
//! conventions (`1.500e-03`, `%g` trailing-zero trimming) so they can be
//! diffed against files produced by other tools.

/// Equivalent of C `%.{precision}e`.
pub fn fmt_e(x: f64, precision: usize) -> String {
    if !x.is_finite() {
        return non_finite(x);
    }
    let raw = format!("{:.*e}", precision, x);
    let (mantissa, exponent) = raw.split_once('e').expect("exponent marker");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    format!("{}{}", mantissa, exponent_suffix(exponent))
}

/// Equivalent of C `%.{precision}g`.
pub fn fmt_g(x: f64, precision: usize) -> String {
    if !x.is_finite() {
        return non_finite(x);
    }
    let precision = precision.max(1);
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let raw = format!("{:.*e}", precision - 1, x);
    let (mantissa, exponent) = raw.split_once('e').expect("exponent marker");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if exponent < -4 || exponent >= precision as i32 {
        format!("{}{}", trim_zeros(mantissa), exponent_suffix(exponent))
    } else {
        let decimals = (precision as i32 - 1 - exponent).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn exponent_suffix(exponent: i32) -> String {
    let sign = if exponent < 0 { '-' } else { '+' };
    format!("e{}{:02}", sign, exponent.abs())
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn non_finite(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}
