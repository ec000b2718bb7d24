//! Number formatting for CSV output.

use std::io::Write;

/// Formats like C's `%.17g`: 17 significant digits, trailing zeros trimmed.
pub fn g17(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{v:.16e}");
        let (mantissa, exponent) = s.split_once('e').expect("exponent form");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{mantissa}e{exponent}")
    }
}

/// Writes rows of values as comma-separated lines.
pub fn write_csv_rows<'a, W, I, T>(mut w: W, rows: I, fmt: impl Fn(&T) -> String) -> std::io::Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a [T]>,
    T: 'a,
{
    for row in rows {
        let line: Vec<String> = row.iter().map(&fmt).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()
}
