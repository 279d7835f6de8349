//! Binary (P5) PGM images, 8-bit only.
//!
//! Pixels are normalized to `[0, 1]` against the declared maximum value on
//! read and scaled back to `0..=255` on write.

use super::IoError;
use crate::numerics::DenseMatrix;
use std::io::Write;
use std::path::Path;

// Refuse headers promising more pixels than this before touching the
// payload, so a short hostile header cannot trigger a huge allocation.
const MAX_PIXELS: usize = 1 << 28;

struct Tokenizer<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Tokenizer<'a> {
    // Skips whitespace and `#` comments (which run to end of line).
    fn skip_separators(&mut self) {
        while self.pos < self.data.len() {
            let b = self.data[self.pos];
            if b == b'#' {
                while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8], IoError> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            if self.data[self.pos] == b'#' {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(IoError::parse(0, "unexpected end of PGM header"));
        }
        Ok(&self.data[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize, IoError> {
        let tok = self.token()?;
        let s = std::str::from_utf8(tok)
            .map_err(|_| IoError::parse(0, format!("non-ASCII {what} in PGM header")))?;
        s.parse::<usize>()
            .map_err(|_| IoError::parse(0, format!("invalid {what} '{s}' in PGM header")))
    }
}

/// Parses a binary 8-bit PGM image into a matrix with entries in `[0, 1]`.
pub fn parse_pgm(data: &[u8]) -> Result<DenseMatrix, IoError> {
    let mut tk = Tokenizer { data, pos: 0 };
    let magic = tk.token()?;
    if magic != b"P5" {
        return Err(IoError::UnsupportedFormat(format!(
            "expected binary PGM magic 'P5', found {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = tk.number("width")?;
    let height = tk.number("height")?;
    let maxval = tk.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(IoError::parse(0, "PGM dimensions must be positive"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(IoError::UnsupportedFormat(format!(
            "only 8-bit PGM supported (maxval {maxval})"
        )));
    }
    let pixels = width
        .checked_mul(height)
        .filter(|&p| p <= MAX_PIXELS)
        .ok_or_else(|| IoError::parse(0, "PGM dimensions too large"))?;

    // Exactly one whitespace byte separates the header from the payload.
    if tk.pos >= data.len() || !data[tk.pos].is_ascii_whitespace() {
        return Err(IoError::parse(0, "missing separator before PGM payload"));
    }
    let payload = &data[tk.pos + 1..];
    if payload.len() < pixels {
        return Err(IoError::parse(
            0,
            format!("PGM payload has {} bytes, expected {pixels}", payload.len()),
        ));
    }

    let scale = 1.0 / maxval as f64;
    let entries: Vec<f64> = payload[..pixels]
        .iter()
        .map(|&b| (b as usize).min(maxval) as f64 * scale)
        .collect();
    DenseMatrix::new(height, width, entries)
        .map_err(|e| IoError::parse(0, format!("invalid pixel data: {e}")))
}

fn encode(m: &DenseMatrix, to_byte: impl Fn(f64) -> u8) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + m.n_rows() * m.n_cols());
    out.extend_from_slice(format!("P5\n{} {}\n255\n", m.n_cols(), m.n_rows()).as_bytes());
    for r in 0..m.n_rows() {
        for &v in m.row(r) {
            out.push(to_byte(v));
        }
    }
    out
}

/// Writes entries assumed in `[0, 1]`, clamped and scaled to `0..=255`.
pub fn write_pgm(m: &DenseMatrix, path: &Path) -> Result<(), IoError> {
    let bytes = encode(m, |v| (v.clamp(0.0, 1.0) * 255.0).round() as u8);
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

/// Writes an arbitrary non-negative map with linear scaling so that its
/// maximum lands on 255 (an all-zero map stays black).
pub fn write_scaled_map(m: &DenseMatrix, path: &Path) -> Result<(), IoError> {
    let max = m.max_abs_entry();
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let bytes = encode(m, |v| (v.abs() * scale).round().clamp(0.0, 255.0) as u8);
    let mut f = std::fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_small_image() {
        let m = DenseMatrix::from_rows(&[vec![0.0, 0.5], vec![1.0, 0.25]]).unwrap();
        let bytes = encode(&m, |v| (v.clamp(0.0, 1.0) * 255.0).round() as u8);
        let back = parse_pgm(&bytes).unwrap();
        assert_eq!(back.n_rows(), 2);
        assert_eq!(back.n_cols(), 2);
        for (a, b) in back.entries().iter().zip(m.entries().iter()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn parses_comments_and_whitespace() {
        let data = b"P5 # magic\n# a comment line\n 2 \n2\n255\n\x00\x7f\xff\x01";
        let m = parse_pgm(data).unwrap();
        assert_eq!(m.n_rows(), 2);
        assert!((m.get(0, 1) - 127.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(parse_pgm(b"P2\n2 2\n255\n....").is_err()); // ASCII PGM
        assert!(parse_pgm(b"P5\n2 2\n65535\n").is_err()); // 16-bit
        assert!(parse_pgm(b"P5\n2 2\n255\n\x00\x01").is_err()); // short payload
        assert!(parse_pgm(b"P5\n0 2\n255\n").is_err()); // zero dimension
        assert!(parse_pgm(b"P5\n999999999 999999999\n255\n").is_err()); // absurd
        assert!(parse_pgm(b"").is_err());
    }

    #[test]
    fn scaled_map_normalizes_to_full_range() {
        let m = DenseMatrix::from_rows(&[vec![0.0, 0.01], vec![0.02, 0.0]]).unwrap();
        let dir = std::env::temp_dir().join("reweight_pgm_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("map.pgm");
        write_scaled_map(&m, &path).unwrap();
        let back = parse_pgm(&std::fs::read(&path).unwrap()).unwrap();
        assert!((back.get(1, 0) - 1.0).abs() < 1e-12);
        assert_eq!(back.get(0, 0), 0.0);
    }
}
