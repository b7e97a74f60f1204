//! Single-line JSON reports with every float written to 17 significant digits.

use std::io;

use nalgebra::{Complex, DMatrix};
use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter};
use serde_json::Value;

struct SignificantDigits;

impl Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{}", format_f64(value))
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }

    fn write_null<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        CompactFormatter.write_null(writer)
    }
}

/// `d.dddddddddddddddde±x`, a valid JSON number.
pub fn format_f64(value: f64) -> String {
    format!("{value:.16e}")
}

/// Serializes `record` on one line, terminated by a newline.
pub fn render<T: Serialize>(record: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SignificantDigits);
    record.serialize(&mut ser).expect("reports serialize");
    let mut text = String::from_utf8(out).expect("json is utf-8");
    text.push('\n');
    text
}

/// Row-major `[[[re, im], ...], ...]`.
pub fn matrix(m: &DMatrix<Complex<f64>>) -> Value {
    Value::from(
        m.row_iter()
            .map(|r| Value::from(r.iter().map(|z| Value::from(vec![z.re, z.im])).collect::<Vec<_>>()))
            .collect::<Vec<_>>(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_carry_seventeen_digits() {
        assert_eq!(format_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(format_f64(-2.0), "-2.0000000000000000e0");
        let text = render(&json!({"a": 0.1, "n": 3, "ok": true}));
        assert_eq!(text, "{\"a\":1.0000000000000001e-1,\"n\":3,\"ok\":true}\n");
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
    }

    #[test]
    fn matrices_are_rows_of_pairs() {
        let m = DMatrix::from_row_slice(1, 2, &[Complex::new(1.0, 2.0), Complex::new(3.0, -4.0)]);
        assert_eq!(matrix(&m), json!([[[1.0, 2.0], [3.0, -4.0]]]));
    }
}
