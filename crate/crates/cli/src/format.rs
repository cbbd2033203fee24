//! Locale-free numeric formatting for output files.

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Up to 12 significant digits, fixed notation for moderate exponents and
/// scientific otherwise (the C `%.12g` convention).
pub fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa), exp.abs())
    }
}

#[cfg(test)]
mod tests {
    use super::num;

    #[test]
    fn matches_c_general_format() {
        assert_eq!(num(0.0), "0");
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(1.0), "1");
        assert_eq!(num(2.5), "2.5");
        assert_eq!(num(-154.25), "-154.25");
        assert_eq!(num(1.0 / 3.0), "0.333333333333");
        assert_eq!(num(123456789012.0), "123456789012");
        assert_eq!(num(1234567890123.0), "1.23456789012e+12");
        assert_eq!(num(0.0001), "0.0001");
        assert_eq!(num(0.00001), "1e-05");
        assert_eq!(num(9.9999999999999), "10");
        assert_eq!(num(f64::NAN), "NaN");
    }
}
