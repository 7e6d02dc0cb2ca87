//! Deterministic CSV and JSON writers for scenario artifacts.
//!
//! Complex numbers are written as `[re, im]`; floats use the shortest
//! representation that round-trips, so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64 as C64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Result;
use crate::histogram::{ProjectedHistogram, TwoTimeHistogram};
use crate::math::ComplexMatrix;

pub fn complex_json(z: C64) -> Value {
    json!([z.re, z.im])
}

/// Row-major nested `[re, im]` arrays.
pub fn matrix_json(m: &ComplexMatrix) -> Value {
    Value::Array(
        (0..m.rows()).map(|r| Value::Array((0..m.cols()).map(|c| complex_json(m[(r, c)])).collect())).collect(),
    )
}

/// Simple CSV table with a header row.
#[derive(Debug, Clone, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row<T: std::fmt::Display>(&mut self, values: &[T]) {
        let mut first = true;
        for v in values {
            if !first {
                self.text.push(',');
            }
            first = false;
            let _ = write!(self.text, "{v}");
        }
        self.text.push('\n');
    }

    /// Row with a leading label column.
    pub fn labeled_row<T: std::fmt::Display>(&mut self, label: &str, values: &[T]) {
        self.text.push_str(label);
        for v in values {
            let _ = write!(self.text, ",{v}");
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// Matrix dump with the `t_X` cell centers as header and one `t_B` row per cell.
pub fn histogram_csv(h: &TwoTimeHistogram, norm: f64) -> Csv {
    let axis = h.axis();
    let mut header = vec!["t_B\\t_X".to_string()];
    header.extend(axis.iter().map(|t| t.to_string()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&header);
    for (t, row) in axis.iter().zip(&h.intensities) {
        let values: Vec<f64> = row.iter().map(|v| v / norm).collect();
        csv.labeled_row(&t.to_string(), &values);
    }
    csv
}

/// Long-format table of both projections.
pub fn projection_csv(diagonal: &ProjectedHistogram, antidiagonal: &ProjectedHistogram, norm: f64) -> Csv {
    let mut csv = Csv::new(&["projection", "t", "counts"]);
    for (name, p) in [("t_B+t_X", diagonal), ("t_B-t_X", antidiagonal)] {
        for (t, v) in p.axis.iter().zip(&p.intensities) {
            csv.labeled_row(name, &[*t, v / norm]);
        }
    }
    csv
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    std::fs::write(dir.join(name), text)?;
    Ok(())
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| std::io::Error::other(e.to_string()))?;
    text.push('\n');
    write_text(dir, name, &text)
}
