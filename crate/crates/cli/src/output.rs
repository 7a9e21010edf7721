use std::io::Write;

use num_complex::Complex64;
use okernel::linalg::{CMatrix, CVector};
use okernel::Point;

/// `x` with 12 significant digits, `%g`-style: fixed notation for moderate
/// exponents, scientific otherwise, trailing zeros dropped.
pub fn real(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    // the exponent after rounding to 12 digits decides the notation
    let sci = format!("{:.11e}", x);
    let (mantissa, e) = sci.split_once('e').expect("scientific format");
    let exp: i32 = e.parse().expect("exponent");
    if (-4..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim(&format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim(mantissa), exp)
    }
}

fn trim(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// `a+bi` / `a-bi`.
pub fn complex(z: Complex64) -> String {
    let re = if z.re == 0.0 { 0.0 } else { z.re };
    let im = if z.im == 0.0 { 0.0 } else { z.im };
    if im < 0.0 {
        format!("{}-{}i", real(re), real(-im))
    } else {
        format!("{}+{}i", real(re), real(im))
    }
}

pub fn point(p: &Point) -> Vec<String> {
    match p {
        Point::Real(x) => x.iter().map(|v| real(*v)).collect(),
        Point::Natural(j) => vec![j.to_string()],
        Point::Residue { value, .. } => vec![value.to_string()],
    }
}

/// One matrix row per line, entries separated by spaces.
pub fn matrix_text(a: &CMatrix) -> String {
    let mut out = String::new();
    for i in 0..a.nrows() {
        let row: Vec<String> = (0..a.ncols()).map(|j| complex(a[(i, j)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Row-major entries split into `re, im` columns.
pub fn split_entries(a: &CMatrix) -> Vec<String> {
    let mut out = Vec::with_capacity(2 * a.len());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out.push(real(a[(i, j)].re));
            out.push(real(a[(i, j)].im));
        }
    }
    out
}

pub fn split_vector(v: &CVector) -> Vec<String> {
    v.iter().flat_map(|z| [real(z.re), real(z.im)]).collect()
}

pub fn csv_rows(rows: &[Vec<String>]) -> std::io::Result<String> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

/// Writes to `path`, or stdout when absent.
pub fn emit(path: Option<&std::path::Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                out.write_all(b"\n")?;
            }
            out.flush()
        }
    }
}
