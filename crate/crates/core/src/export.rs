//! Plain-text output helpers shared by the CSV writers.

/// Formats a real with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_real(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for v in [
            0.0,
            1.0,
            -2.5e-300,
            std::f64::consts::PI,
            1.0 / 3.0,
            f64::MAX,
        ] {
            let s = fmt_real(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_real(0.1), "1.0000000000000001e-1");
    }
}
