//! Dense linear-algebra kernels and seeded random generators.
//!
//! Everything else in the crate builds on the [`DenseMatrix`] type and the
//! handful of operations here. Factorizations are delegated to `nalgebra`;
//! the contract is the invariants checked by the test suite (orthonormal
//! factors to 1e-10, reconstruction to 1e-8 relative), not a named routine.
//!
//! Generators are pure functions of `(dimensions, seed)`. The generator is
//! ChaCha8 keyed by the seed, so outputs are reproducible byte-for-byte
//! across runs and platforms.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("entry buffer has length {found}, expected {rows}x{cols}={expected}")]
    BadEntryCount {
        rows: usize,
        cols: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("matrix dimensions must be positive, got {0}x{1}")]
    EmptyDimensions(usize, usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("SVD iteration failed to converge within the iteration bound")]
    SvdDidNotConverge,
}

/// Row-major dense real matrix. Entries are finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(n_rows: usize, n_cols: usize, entries: Vec<f64>) -> Result<Self, NumericsError> {
        if n_rows == 0 || n_cols == 0 {
            return Err(NumericsError::EmptyDimensions(n_rows, n_cols));
        }
        if entries.len() != n_rows * n_cols {
            return Err(NumericsError::BadEntryCount {
                rows: n_rows,
                cols: n_cols,
                expected: n_rows * n_cols,
                found: entries.len(),
            });
        }
        if let Some(i) = entries.iter().position(|e| !e.is_finite()) {
            return Err(NumericsError::NonFinite(i));
        }
        Ok(Self {
            n_rows,
            n_cols,
            entries,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        assert!(n_rows > 0 && n_cols > 0, "dimensions must be positive");
        Self {
            n_rows,
            n_cols,
            entries: vec![0.0; n_rows * n_cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, NumericsError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(NumericsError::EmptyDimensions(rows.len(), 0));
        }
        let n_cols = rows[0].len();
        if let Some(r) = rows.iter().find(|r| r.len() != n_cols) {
            return Err(NumericsError::DimensionMismatch(format!(
                "ragged rows: {} vs {}",
                r.len(),
                n_cols
            )));
        }
        let entries: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), n_cols, entries)
    }

    /// Column-major diagonal embedding of `sigma` into an `n_rows x n_cols` frame.
    pub fn from_diagonal(n_rows: usize, n_cols: usize, sigma: &[f64]) -> Self {
        let mut m = Self::zeros(n_rows, n_cols);
        for (i, &s) in sigma.iter().enumerate().take(n_rows.min(n_cols)) {
            m.set(i, i, s);
        }
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.n_rows && c < self.n_cols);
        self.entries[r * self.n_cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.n_rows && c < self.n_cols);
        self.entries[r * self.n_cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.entries[r * self.n_cols..(r + 1) * self.n_cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.get(r, c)).collect()
    }

    /// Matrix with the columns indexed by `idx`, in the given order.
    pub fn select_columns(&self, idx: &[usize]) -> Self {
        assert!(!idx.is_empty(), "column selection must be non-empty");
        let mut m = Self::zeros(self.n_rows, idx.len());
        for (j_out, &j) in idx.iter().enumerate() {
            for i in 0..self.n_rows {
                m.set(i, j_out, self.get(i, j));
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.n_cols, self.n_rows);
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols, "matvec dimension mismatch");
        let mut y = vec![0.0; self.n_rows];
        for i in 0..self.n_rows {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x.iter()) {
                acc += a * b;
            }
            y[i] = acc;
        }
        y
    }

    /// `A^T x` without materializing the transpose.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_rows, "tr_matvec dimension mismatch");
        let mut y = vec![0.0; self.n_cols];
        for i in 0..self.n_rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let row = self.row(i);
            for (yj, a) in y.iter_mut().zip(row.iter()) {
                *yj += a * xi;
            }
        }
        y
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n_cols, other.n_rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.n_rows, other.n_cols);
        for i in 0..self.n_rows {
            for k in 0..self.n_cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let out_row =
                    &mut out.entries[i * other.n_cols..(i + 1) * other.n_cols];
                for (o, b) in out_row.iter_mut().zip(orow.iter()) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        let entries = self
            .entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| a + b)
            .collect();
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            entries,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        let entries = self
            .entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| a - b)
            .collect();
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            entries,
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            entries: self.entries.iter().map(|e| c * e).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|e| e * e).sum::<f64>().sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.entries.iter().fold(0.0f64, |m, e| m.max(e.abs()))
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        let na = self.to_nalgebra();
        na.singular_values().max()
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_rows, self.n_cols, &self.entries)
    }

    pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        let mut entries = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                entries.push(m[(i, j)]);
            }
        }
        Self {
            n_rows: m.nrows(),
            n_cols: m.ncols(),
            entries,
        }
    }
}

/// Thin SVD `A = U diag(sigma) V^T` with `r = min(n_rows, n_cols)` and the
/// singular values sorted non-increasing (trailing zeros permitted).
#[derive(Debug, Clone)]
pub struct SvdFactorization {
    pub left_factors: DenseMatrix,
    pub singular_values: Vec<f64>,
    pub right_factors: DenseMatrix,
}

impl SvdFactorization {
    /// `U diag(sigma) V^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let u = &self.left_factors;
        let v = &self.right_factors;
        let r = self.singular_values.len();
        let mut out = DenseMatrix::zeros(u.n_rows(), v.n_rows());
        for k in 0..r {
            let s = self.singular_values[k];
            if s == 0.0 {
                continue;
            }
            for i in 0..u.n_rows() {
                let us = u.get(i, k) * s;
                if us == 0.0 {
                    continue;
                }
                for j in 0..v.n_rows() {
                    let cur = out.get(i, j);
                    out.set(i, j, cur + us * v.get(j, k));
                }
            }
        }
        out
    }
}

// Generous sweep bound for the Golub-Kahan iteration; convergence failures
// are surfaced instead of silently returning garbage.
const SVD_MAX_SWEEPS: usize = 10_000;

/// Full thin SVD of a dense matrix.
pub fn svd(a: &DenseMatrix) -> Result<SvdFactorization, NumericsError> {
    let na = a.to_nalgebra();
    let fact = na
        .try_svd(true, true, f64::EPSILON, SVD_MAX_SWEEPS)
        .ok_or(NumericsError::SvdDidNotConverge)?;
    let u = fact.u.expect("u requested");
    let vt = fact.v_t.expect("v_t requested");
    let r = fact.singular_values.len();

    // Sort non-increasing, permuting the factors along.
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| {
        fact.singular_values[j]
            .partial_cmp(&fact.singular_values[i])
            .unwrap()
    });

    let mut left = DenseMatrix::zeros(a.n_rows(), r);
    let mut right = DenseMatrix::zeros(a.n_cols(), r);
    let mut sigma = Vec::with_capacity(r);
    for (k_out, &k) in order.iter().enumerate() {
        sigma.push(fact.singular_values[k].max(0.0));
        for i in 0..a.n_rows() {
            left.set(i, k_out, u[(i, k)]);
        }
        for j in 0..a.n_cols() {
            right.set(j, k_out, vt[(k, j)]);
        }
    }
    Ok(SvdFactorization {
        left_factors: left,
        singular_values: sigma,
        right_factors: right,
    })
}

/// Minimum-norm minimizer of `||A z - b||_2`, via the SVD pseudoinverse.
pub fn least_squares_solve(a: &DenseMatrix, b: &[f64]) -> Vec<f64> {
    assert_eq!(b.len(), a.n_rows(), "rhs length must match rows of A");
    let fact = svd(a).expect("SVD convergence failure in least_squares_solve");
    let sigma_max = fact.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = sigma_max * f64::EPSILON * a.n_rows().max(a.n_cols()) as f64;
    let mut z = vec![0.0; a.n_cols()];
    for (k, &s) in fact.singular_values.iter().enumerate() {
        if s <= cutoff {
            break;
        }
        let mut ub = 0.0;
        for i in 0..a.n_rows() {
            ub += fact.left_factors.get(i, k) * b[i];
        }
        let coeff = ub / s;
        for j in 0..a.n_cols() {
            z[j] += coeff * fact.right_factors.get(j, k);
        }
    }
    z
}

/// `rows x cols` matrix with i.i.d. standard normal entries, filled
/// row-major from a ChaCha8 stream keyed by `seed`.
pub fn standard_gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    assert!(rows >= 1 && cols >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    DenseMatrix {
        n_rows: rows,
        n_cols: cols,
        entries,
    }
}

/// `m x n` sensing matrix with i.i.d. centered Gaussian entries of
/// variance `1/m`, filled row-major from a ChaCha8 stream keyed by `seed`.
pub fn gaussian_sensing_matrix(m: usize, n: usize, seed: u64) -> DenseMatrix {
    let scale = 1.0 / (m as f64).sqrt();
    standard_gaussian_matrix(m, n, seed).scale(scale)
}

/// Vector of length `n` with exactly `s` non-zeros: the support is a
/// uniformly random size-`s` subset, the values are i.i.d. standard normal.
pub fn random_sparse_vector(n: usize, s: usize, seed: u64) -> Vec<f64> {
    assert!(s <= n, "sparsity cannot exceed the dimension");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut support = rand::seq::index::sample(&mut rng, n, s).into_vec();
    support.sort_unstable();
    let mut x = vec![0.0; n];
    for i in support {
        // Standard normal has zero mass at 0, so the support is exact.
        let mut v: f64 = rng.sample(StandardNormal);
        while v == 0.0 {
            v = rng.sample(StandardNormal);
        }
        x[i] = v;
    }
    x
}

/// Number of singular values above `rel_tol * sigma_1`; zero when the
/// spectrum is entirely zero.
pub fn numerical_rank(sigma: &[f64], rel_tol: f64) -> usize {
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    if sigma_max <= 0.0 {
        return 0;
    }
    let cut = rel_tol * sigma_max;
    sigma.iter().take_while(|&&s| s > cut).count()
}

/// SplitMix64 step, used to derive independent sub-seeds from a base seed
/// and a work-item index without correlations between streams.
pub fn derive_seed(base: u64, index: u64, slot: u64) -> u64 {
    let mut z = base
        .wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(slot.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub(crate) fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}
