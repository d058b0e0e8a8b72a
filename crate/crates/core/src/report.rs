//! Plain-text numeric output shared by every CSV writer: 12 significant
//! digits, '.' as decimal separator, no exponent, no locale.

/// Formats `v` with 12 significant digits in positional notation.
pub fn format_sig12(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".to_string();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    let text = format!("{v:.decimals$}");
    // rounding can carry into a new leading digit (9.99... -> 10.0...)
    let digits = text
        .bytes()
        .filter(u8::is_ascii_digit)
        .skip_while(|&b| b == b'0')
        .count();
    if digits > 12 && decimals > 0 {
        let decimals = decimals - 1;
        return format!("{v:.decimals$}");
    }
    text
}

/// One CSV line from a leading label and numeric columns.
pub fn csv_row(label: &str, values: &[f64]) -> String {
    let mut line = String::from(label);
    for v in values {
        line.push(',');
        line.push_str(&format_sig12(*v));
    }
    line.push('\n');
    line
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_sig12(0.0), "0");
        assert_eq!(format_sig12(0.7599), "0.759900000000");
        assert_eq!(format_sig12(1.0), "1.00000000000");
        assert_eq!(format_sig12(-2.5), "-2.50000000000");
        assert_eq!(format_sig12(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_sig12(0.0012345), "0.00123450000000");
        assert_eq!(format_sig12(123456789012345.0), "123456789012345");
        assert_eq!(format_sig12(9.9999999999999), "10.0000000000");
    }

    #[test]
    fn rows() {
        assert_eq!(csv_row("1/2", &[0.5, 0.25]), "1/2,0.500000000000,0.250000000000\n");
        assert_eq!(csv_row("", &[0.0]), ",0\n");
    }
}
