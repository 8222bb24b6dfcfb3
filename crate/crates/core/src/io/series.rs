use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Canonical decimal form: 9 significant digits in scientific notation.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v == 0.0 {
        // drop the sign of negative zero
        "0.00000000e0".to_string()
    } else {
        format!("{v:.8e}")
    }
}

/// Column-oriented numeric table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SeriesTable {
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, header: impl Into<String>, column: Vec<f64>) -> Self {
        self.push(header, column);
        self
    }

    pub fn push(&mut self, header: impl Into<String>, column: Vec<f64>) {
        self.headers.push(header.into());
        self.columns.push(column);
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.headers
            .iter()
            .position(|h| h == name)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = self.headers.join(",");
        out.push('\n');
        for r in 0..self.rows() {
            let row: Vec<String> = self.columns.iter().map(|c| format_value(c[r])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Writes the table as CSV with canonical number formatting.
pub fn write_series_csv(path: &Path, table: &SeriesTable) -> Result<()> {
    if let Some(bad) = table.columns.iter().position(|c| c.len() != table.rows()) {
        return Err(Error::LengthMismatch {
            what: "series column",
            expected: table.rows(),
            actual: table.columns[bad].len(),
        });
    }
    fs::write(path, table.to_csv_string())?;
    Ok(())
}

pub fn read_series_csv(path: &Path) -> Result<SeriesTable> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut columns = vec![Vec::new(); headers.len()];
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        for (i, col) in columns.iter_mut().enumerate() {
            let s = rec.get(i).unwrap_or("");
            let v = s.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: row + 2,
                message: format!("'{s}' is not a number"),
            })?;
            col.push(v);
        }
    }
    Ok(SeriesTable { headers, columns })
}
