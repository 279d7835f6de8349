//! Result CSV files: a header row, then one record per line, floats
//! written with 17 significant digits so identical runs are byte-identical
//! and values round-trip exactly.

use super::IoError;
use std::fmt::Write as _;
use std::path::Path;

/// 17 significant digits, scientific notation.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, fields: Vec<String>) {
        assert_eq!(
            fields.len(),
            self.header.len(),
            "row width must match the header"
        );
        self.rows.push(fields);
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{}", self.header.join(",")).expect("string write");
        for row in &self.rows {
            writeln!(out, "{}", row.join(",")).expect("string write");
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }
}
