//! Sparse matrix observations as `row,col,value` CSV triplets.

use super::IoError;
use crate::mc::{MaskSet, MaskedMatrix};

/// Parses `row,col,value` lines (an optional `row,col,value` header and
/// `#` comment lines are skipped).
pub fn parse_triplets(text: &str) -> Result<Vec<(usize, usize, f64)>, IoError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if idx == 0 && line.eq_ignore_ascii_case("row,col,value") {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(IoError::parse(
                lineno,
                format!("expected row,col,value; found {} fields", fields.len()),
            ));
        }
        let row: usize = fields[0]
            .trim()
            .parse()
            .map_err(|_| IoError::parse(lineno, format!("bad row index '{}'", fields[0])))?;
        let col: usize = fields[1]
            .trim()
            .parse()
            .map_err(|_| IoError::parse(lineno, format!("bad column index '{}'", fields[1])))?;
        let value: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| IoError::parse(lineno, format!("bad value '{}'", fields[2])))?;
        if !value.is_finite() {
            return Err(IoError::parse(lineno, "non-finite value"));
        }
        out.push((row, col, value));
    }
    Ok(out)
}

/// Assembles triplets into observations; the frame defaults to the
/// smallest one containing every cell.
pub fn to_masked_matrix(
    triplets: &[(usize, usize, f64)],
    n_rows: Option<usize>,
    n_cols: Option<usize>,
) -> Result<MaskedMatrix, IoError> {
    if triplets.is_empty() {
        return Err(IoError::parse(0, "no observations"));
    }
    let max_r = triplets.iter().map(|t| t.0).max().unwrap_or(0);
    let max_c = triplets.iter().map(|t| t.1).max().unwrap_or(0);
    let n_rows = n_rows.unwrap_or(max_r + 1);
    let n_cols = n_cols.unwrap_or(max_c + 1);
    let cells: Vec<(usize, usize)> = triplets.iter().map(|t| (t.0, t.1)).collect();
    let values: Vec<f64> = triplets.iter().map(|t| t.2).collect();
    let mask = MaskSet::new(n_rows, n_cols, cells)
        .map_err(|e| IoError::parse(0, e.to_string()))?;
    MaskedMatrix::new(mask, values).map_err(|e| IoError::parse(0, e.to_string()))
}
