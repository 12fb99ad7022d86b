//! Number formatting shared by the CSV and JSON writers.

/// Formats like C's `%.12g`: 12 significant digits, trailing zeros
/// stripped, scientific notation outside `1e-5 <= |x| < 1e12`.
pub fn g12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    // exponent after rounding to 12 significant digits
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        return format!(
            "{}e{}{:02}",
            trim(mantissa),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        );
    }
    let decimals = (11 - exp).max(0) as usize;
    trim(&format!("{x:.decimals$}")).to_string()
}

fn trim(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Comma-joined `g12` values.
pub fn join_g12(values: &[f64]) -> String {
    values.iter().map(|&v| g12(v)).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(g12(0.0), "0");
        assert_eq!(g12(1.0), "1");
        assert_eq!(g12(-0.1), "-0.1");
        assert_eq!(g12(0.2), "0.2");
        assert_eq!(g12(1.0 / 3.0), "0.333333333333");
        assert_eq!(g12(12.0), "12");
        assert_eq!(g12(1234567.891), "1234567.891");
        assert_eq!(g12(1e-7), "1e-07");
        assert_eq!(g12(2.5e13), "2.5e+13");
        assert_eq!(g12(-1.13483443), "-1.13483443");
        assert_eq!(g12(0.1 + 0.2), "0.3");
        assert_eq!(g12(0.00012345), "0.00012345");
        assert_eq!(g12(999999999999.9), "1e+12");
    }
}
