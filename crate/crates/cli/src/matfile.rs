//! Matrix file format: a small JSON schema with row-major data.
//!
//! `{"rows": m, "cols": n, "complex": bool, "data": [...]}` where entries are
//! plain numbers, or two-element `[re, im]` arrays when `complex` is true.
//! Numbers are written with 17 significant digits so the decimal round-trip
//! is lossless.

use crate::error::{CliError, Result};
use mpinv_core::Mat;
use num_complex::Complex64 as C64;
use serde_json::Value;
use std::fs;
use std::path::Path;

/// Formats a float with 17 significant digits (lossless f64 round-trip).
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "\"nan\"".to_string()
    } else if x > 0.0 {
        "\"inf\"".to_string()
    } else {
        "\"-inf\"".to_string()
    }
}

/// Reads a matrix file, promoting real data to the complex carrier.
pub fn read_matrix(path: &Path) -> Result<Mat> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    parse_matrix(&value).map_err(|e| match e {
        CliError::Parse(msg) => CliError::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn field<'v>(value: &'v Value, name: &str) -> Result<&'v Value> {
    value
        .get(name)
        .ok_or_else(|| CliError::Parse(format!("missing field \"{name}\"")))
}

fn parse_matrix(value: &Value) -> Result<Mat> {
    let rows = field(value, "rows")?
        .as_u64()
        .ok_or_else(|| CliError::Parse("field \"rows\" must be a nonnegative integer".into()))?
        as usize;
    let cols = field(value, "cols")?
        .as_u64()
        .ok_or_else(|| CliError::Parse("field \"cols\" must be a nonnegative integer".into()))?
        as usize;
    let complex = field(value, "complex")?
        .as_bool()
        .ok_or_else(|| CliError::Parse("field \"complex\" must be a boolean".into()))?;
    let data = field(value, "data")?
        .as_array()
        .ok_or_else(|| CliError::Parse("field \"data\" must be an array".into()))?;
    if data.len() != rows * cols {
        return Err(CliError::Parse(format!(
            "field \"data\" has {} entries, expected rows*cols = {}",
            data.len(),
            rows * cols
        )));
    }
    let mut entries = Vec::with_capacity(rows * cols);
    for (idx, item) in data.iter().enumerate() {
        let entry = if complex {
            let pair = item.as_array().ok_or_else(|| {
                CliError::Parse(format!("data[{idx}]: expected a [re, im] pair"))
            })?;
            if pair.len() != 2 {
                return Err(CliError::Parse(format!(
                    "data[{idx}]: expected exactly two components, got {}",
                    pair.len()
                )));
            }
            let re = pair[0].as_f64().ok_or_else(|| {
                CliError::Parse(format!("data[{idx}][0]: expected a number"))
            })?;
            let im = pair[1].as_f64().ok_or_else(|| {
                CliError::Parse(format!("data[{idx}][1]: expected a number"))
            })?;
            C64::new(re, im)
        } else {
            let re = item
                .as_f64()
                .ok_or_else(|| CliError::Parse(format!("data[{idx}]: expected a number")))?;
            C64::new(re, 0.0)
        };
        if !entry.re.is_finite() || !entry.im.is_finite() {
            return Err(CliError::Parse(format!("data[{idx}]: non-finite entry")));
        }
        entries.push(entry);
    }
    Ok(Mat::from_row_major(rows, cols, &entries))
}

/// Serializes a matrix to the file format. Real-stored matrices are written
/// with `"complex": false` and plain numeric data.
pub fn matrix_to_string(m: &Mat) -> String {
    let complex = !m.is_real();
    let mut out = String::new();
    out.push_str(&format!(
        "{{\"rows\":{},\"cols\":{},\"complex\":{},\"data\":[",
        m.rows(),
        m.cols(),
        complex
    ));
    let mut first = true;
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if !first {
                out.push(',');
            }
            first = false;
            let z = m.get(i, j);
            if complex {
                out.push_str(&format!("[{},{}]", fmt_f64(z.re), fmt_f64(z.im)));
            } else {
                out.push_str(&fmt_f64(z.re));
            }
        }
    }
    out.push_str("]}\n");
    out
}

pub fn write_matrix(path: &Path, m: &Mat) -> Result<()> {
    fs::write(path, matrix_to_string(m))
        .map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))
}
