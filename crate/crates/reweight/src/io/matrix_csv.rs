//! Dense matrices and vectors as plain CSV, plus the `certify` problem
//! file: the sensing matrix followed by one final row holding the signal.

use super::IoError;
use crate::numerics::DenseMatrix;

// A hostile row count times column count must not allocate unboundedly.
const MAX_ENTRIES: usize = 1 << 26;

/// Parses rows of comma-separated floats (blank and `#` lines skipped).
pub fn parse_matrix(text: &str) -> Result<DenseMatrix, IoError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut total = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| IoError::parse(lineno, format!("bad number '{field}'")))?;
            if !v.is_finite() {
                return Err(IoError::parse(lineno, "non-finite entry"));
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(IoError::parse(
                    lineno,
                    format!("row has {} entries, expected {}", row.len(), first.len()),
                ));
            }
        }
        total += row.len();
        if total > MAX_ENTRIES {
            return Err(IoError::parse(lineno, "matrix too large"));
        }
        rows.push(row);
    }
    DenseMatrix::from_rows(&rows).map_err(|e| IoError::parse(0, e.to_string()))
}

/// Parses a vector given either as a single CSV row or as one entry per line.
pub fn parse_vector(text: &str) -> Result<Vec<f64>, IoError> {
    let m = parse_matrix(text)?;
    if m.n_rows() == 1 {
        return Ok(m.row(0).to_vec());
    }
    if m.n_cols() == 1 {
        return Ok(m.column(0));
    }
    Err(IoError::parse(
        0,
        format!("expected a vector, found a {}x{} matrix", m.n_rows(), m.n_cols()),
    ))
}

/// Headerless CSV serialization, one matrix row per line, floats with 17
/// significant digits.
pub fn matrix_to_csv_string(m: &DenseMatrix) -> String {
    let mut out = String::with_capacity(m.n_rows() * m.n_cols() * 8);
    for r in 0..m.n_rows() {
        let fields: Vec<String> = m.row(r).iter().map(|&v| super::results::format_float(v)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Writes a dense matrix in the format [`parse_matrix`] reads back.
pub fn write_matrix(m: &DenseMatrix, path: &std::path::Path) -> Result<(), IoError> {
    std::fs::write(path, matrix_to_csv_string(m))?;
    Ok(())
}

/// Splits a problem file into the sensing matrix (all rows but the last)
/// and the signal (the final row).
pub fn parse_problem(text: &str) -> Result<(DenseMatrix, Vec<f64>), IoError> {
    let all = parse_matrix(text)?;
    if all.n_rows() < 2 {
        return Err(IoError::parse(
            0,
            "problem file needs the matrix rows plus a final signal row",
        ));
    }
    let m = all.n_rows() - 1;
    let rows: Vec<Vec<f64>> = (0..m).map(|r| all.row(r).to_vec()).collect();
    let a = DenseMatrix::from_rows(&rows).map_err(|e| IoError::parse(0, e.to_string()));
    Ok((a?, all.row(m).to_vec()))
}
