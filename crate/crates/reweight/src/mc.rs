//! Matrix completion by weighted spectral soft-thresholding.
//!
//! The estimator is the fixed point of
//! `A = (1/(1+tau)) S_lambda^w(P_Omega_perp(A) + P_Omega(A0))`, where
//! `S_lambda^w` shrinks the j-th singular value by `lambda / w_j`. The
//! iteratively weighted solver (WSST) runs a continuation loop down to a
//! target `lambda` and then refreshes the weights from the spectrum of the
//! current solution a fixed number of rounds. The baseline (NNM) minimizes
//! the nuclear-norm-penalized least squares by accelerated proximal
//! gradient with momentum restarts and the same continuation.
//!
//! Iterates are stored as low-rank factors plus a sparse correction on the
//! observed set, so a solve never materializes a dense matrix when the
//! problem is large; below 512x512 a dense SVD path is used instead.

use crate::cs::WeightVector;
use crate::numerics::{
    derive_seed, numerical_rank, svd, DenseMatrix, NumericsError,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::HashSet;
use thiserror::Error;

/// Relative cutoff defining the reported rank of a reconstruction.
pub const RANK_REL_TOL: f64 = 1e-8;

// Largest dimension still handled by the dense SVD path.
const DENSE_LIMIT: usize = 512;
// Subspace iterations for the randomized factored path.
const POWER_ITERS: usize = 6;
const OVERSAMPLE: usize = 10;

#[derive(Debug, Error)]
pub enum McError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("mask cell ({0}, {1}) out of range")]
    CellOutOfRange(usize, usize),
    #[error("duplicate mask cell ({0}, {1})")]
    DuplicateCell(usize, usize),
    #[error("weights must be non-increasing (violated at index {index})")]
    WeightsNotMonotone { index: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Observation set `Omega` inside an `n_rows x n_cols` frame.
#[derive(Debug, Clone)]
pub struct MaskSet {
    n_rows: usize,
    n_cols: usize,
    cells: Vec<(usize, usize)>,
}

impl MaskSet {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        cells: Vec<(usize, usize)>,
    ) -> Result<Self, McError> {
        if n_rows == 0 || n_cols == 0 {
            return Err(McError::DimensionMismatch(
                "mask frame must have positive dimensions".into(),
            ));
        }
        let mut seen = HashSet::with_capacity(cells.len());
        for &(r, c) in &cells {
            if r >= n_rows || c >= n_cols {
                return Err(McError::CellOutOfRange(r, c));
            }
            if !seen.insert((r, c)) {
                return Err(McError::DuplicateCell(r, c));
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            cells,
        })
    }

    /// Every cell of the frame, row-major.
    pub fn full(n_rows: usize, n_cols: usize) -> Self {
        let cells = (0..n_rows)
            .flat_map(|r| (0..n_cols).map(move |c| (r, c)))
            .collect();
        Self {
            n_rows,
            n_cols,
            cells,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn cells(&self) -> &[(usize, usize)] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// The observed entries `P_Omega(A0)`: unobserved entries of the source
/// matrix are never stored.
#[derive(Debug, Clone)]
pub struct MaskedMatrix {
    mask: MaskSet,
    values: Vec<f64>,
}

impl MaskedMatrix {
    pub fn new(mask: MaskSet, values: Vec<f64>) -> Result<Self, McError> {
        if values.len() != mask.len() {
            return Err(McError::DimensionMismatch(format!(
                "{} values for {} mask cells",
                values.len(),
                mask.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(McError::Numerics(NumericsError::NonFinite(i)));
        }
        Ok(Self { mask, values })
    }

    pub fn mask(&self) -> &MaskSet {
        &self.mask
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.mask.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.mask.n_cols
    }

    /// Zero-filled dense embedding of the observations.
    pub fn dense_embedding(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.mask.n_rows, self.mask.n_cols);
        for (&(r, c), &v) in self.mask.cells.iter().zip(self.values.iter()) {
            m.set(r, c, v);
        }
        m
    }

    pub fn max_abs_value(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest singular value of the dense embedding. Exact below the
    /// dense limit; block subspace iteration on the sparse representation
    /// above it (clusters of near-equal singular values converge poorly
    /// under a single power vector).
    pub fn operator_norm(&self) -> f64 {
        if self.values.iter().all(|&v| v == 0.0) {
            return 0.0;
        }
        let n1 = self.mask.n_rows;
        let n2 = self.mask.n_cols;
        if n1 < DENSE_LIMIT && n2 < DENSE_LIMIT {
            return self.dense_embedding().operator_norm();
        }
        let block = 8.min(n1).min(n2);
        let mut rng = ChaCha8Rng::seed_from_u64(OPERATOR_NORM_PROBE_SEED);
        let mut q = DenseMatrix::new(
            n2,
            block,
            (0..n2 * block)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect(),
        )
        .expect("finite probe");
        let mut sigma = 0.0f64;
        for _ in 0..200 {
            // One round of B^T B applied to the block, re-orthonormalized.
            let mut bq = DenseMatrix::zeros(n1, block);
            for (&(r, c), &val) in self.mask.cells.iter().zip(self.values.iter()) {
                for j in 0..block {
                    let cur = bq.get(r, j);
                    bq.set(r, j, cur + val * q.get(c, j));
                }
            }
            let mut btbq = DenseMatrix::zeros(n2, block);
            for (&(r, c), &val) in self.mask.cells.iter().zip(self.values.iter()) {
                for j in 0..block {
                    let cur = btbq.get(c, j);
                    btbq.set(c, j, cur + val * bq.get(r, j));
                }
            }
            // Rayleigh estimate from the first block column.
            let lead = bq.column(0);
            let sigma_next = lead.iter().map(|x| x * x).sum::<f64>().sqrt();
            let done = (sigma_next - sigma).abs() <= 1e-13 * sigma_next.max(1.0);
            sigma = sigma_next;
            q = thin_q(&btbq);
            if done {
                break;
            }
        }
        sigma
    }
}

// Any fixed probe seed works; it only needs to be reproducible.
const OPERATOR_NORM_PROBE_SEED: u64 = 0x9E37_79B9_7F4A_7C15;

/// Parameters for the completion solvers.
#[derive(Debug, Clone)]
pub struct WsstConfig {
    /// `lambda_target = eps_lambda * ||P_Omega(A0)||_op`.
    pub eps_lambda: f64,
    /// Continuation ratio in (0, 1).
    pub q: f64,
    /// Number of weight-refresh rounds after continuation.
    pub reweight_rounds: usize,
    /// Relative Frobenius change stopping an inner fixed-point loop.
    pub tol: f64,
    /// Ridge parameter of the fixed-point map; 0 matches the experiments,
    /// positive values give the contraction guarantee.
    pub tau: f64,
    /// Cap on iterations of a single inner loop.
    pub max_inner_iters: usize,
    /// Truncate every SVD at this rank when set.
    pub rank_cap: Option<usize>,
}

impl Default for WsstConfig {
    fn default() -> Self {
        Self {
            eps_lambda: 1e-4,
            q: 0.7,
            reweight_rounds: 50,
            tol: 5e-4,
            tau: 0.0,
            max_inner_iters: 500,
            rank_cap: None,
        }
    }
}

impl WsstConfig {
    pub fn validate(&self) -> Result<(), McError> {
        if !(self.eps_lambda > 0.0) {
            return Err(McError::InvalidConfig("eps_lambda must be > 0".into()));
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return Err(McError::InvalidConfig("q must lie in (0, 1)".into()));
        }
        if !(self.tol > 0.0) {
            return Err(McError::InvalidConfig("tol must be > 0".into()));
        }
        if self.tau < 0.0 {
            return Err(McError::InvalidConfig("tau must be >= 0".into()));
        }
        if self.reweight_rounds == 0 {
            return Err(McError::InvalidConfig("reweight_rounds must be >= 1".into()));
        }
        if self.max_inner_iters == 0 {
            return Err(McError::InvalidConfig("max_inner_iters must be >= 1".into()));
        }
        if self.rank_cap == Some(0) {
            return Err(McError::InvalidConfig("rank_cap must be >= 1".into()));
        }
        Ok(())
    }
}

/// A completed matrix plus solve diagnostics.
#[derive(Debug, Clone)]
pub struct CompletionResult {
    pub matrix: DenseMatrix,
    /// `numerical_rank(final_singular_values, 1e-8)`.
    pub rank: usize,
    pub lambda_used: f64,
    pub inner_iterations_total: usize,
    pub reweight_rounds: usize,
    pub final_singular_values: Vec<f64>,
    /// False when some inner loop exhausted its iteration cap.
    pub converged: bool,
    /// True when every intermediate singular value collapsed to zero.
    pub degenerate: bool,
}

/// Result of a single fixed-point solve.
#[derive(Debug, Clone)]
pub struct FixedPointOutcome {
    pub matrix: DenseMatrix,
    pub iterations: usize,
    /// False when the iteration cap was reached before the tolerance.
    pub converged: bool,
}

/// Restriction of a dense matrix to an observation set.
pub fn apply_mask(a: &DenseMatrix, mask: &MaskSet) -> Result<MaskedMatrix, McError> {
    if a.n_rows() != mask.n_rows || a.n_cols() != mask.n_cols {
        return Err(McError::DimensionMismatch(format!(
            "matrix is {}x{}, mask frame is {}x{}",
            a.n_rows(),
            a.n_cols(),
            mask.n_rows,
            mask.n_cols
        )));
    }
    let values = mask.cells.iter().map(|&(r, c)| a.get(r, c)).collect();
    MaskedMatrix::new(mask.clone(), values)
}

/// `sum_j sigma_j(A) / w_j` with `1/0 = +inf`; infinite exactly when a
/// positive singular value meets a zero weight.
pub fn weighted_nuclear_norm(a: &DenseMatrix, w: &WeightVector) -> f64 {
    let min_dim = a.n_rows().min(a.n_cols());
    assert!(
        w.len() >= min_dim,
        "need at least min(n1, n2) = {min_dim} weights"
    );
    let f = svd(a).expect("SVD convergence failure in weighted_nuclear_norm");
    let mut total = 0.0;
    for (j, &s) in f.singular_values.iter().enumerate() {
        let wj = w.weights()[j];
        if s > 0.0 {
            if wj == 0.0 {
                return f64::INFINITY;
            }
            total += s / wj;
        }
    }
    total
}

fn check_monotone(w: &[f64]) -> Result<(), McError> {
    for i in 1..w.len() {
        if w[i] > w[i - 1] {
            return Err(McError::WeightsNotMonotone { index: i });
        }
    }
    if w.iter().any(|&x| x < 0.0 || !x.is_finite()) {
        return Err(McError::InvalidConfig("weights must be finite and >= 0".into()));
    }
    Ok(())
}

// Shrink a sorted spectrum: sigma_j -> (sigma_j - lambda/w_j)_+ / (1+tau),
// with everything past `cap` treated as fully shrunk.
fn threshold_spectrum(sigma: &[f64], lambda: f64, w: &[f64], tau: f64, cap: usize) -> Vec<f64> {
    let scale = 1.0 / (1.0 + tau);
    let mut out = Vec::with_capacity(sigma.len());
    for (j, &s) in sigma.iter().enumerate() {
        if j >= cap {
            break;
        }
        let threshold = if w[j] > 0.0 {
            lambda / w[j]
        } else if lambda > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        let shrunk = if s > threshold { (s - threshold) * scale } else { 0.0 };
        if shrunk <= 0.0 {
            break; // non-increasing by monotone weights: the rest is zero
        }
        out.push(shrunk);
    }
    out
}

/// Weighted spectral soft-thresholding `(1/(1+tau)) S_lambda^w(B)`.
///
/// Requires non-increasing non-negative weights (the regime where the
/// weighted nuclear norm promotes low rank); the output spectrum is then
/// non-increasing as well.
///
/// Thresholds attach to positions in the sorted spectrum. When distinct
/// weights meet (near-)tied singular values the result follows the SVD's
/// ordering of the tied block, and inputs whose tied directions swap
/// order can move apart under the operator.
pub fn soft_threshold_weighted(
    b: &DenseMatrix,
    lambda: f64,
    w: &WeightVector,
    tau: f64,
) -> Result<DenseMatrix, McError> {
    if lambda < 0.0 || tau < 0.0 {
        return Err(McError::InvalidConfig(
            "lambda and tau must be non-negative".into(),
        ));
    }
    let min_dim = b.n_rows().min(b.n_cols());
    if w.len() < min_dim {
        return Err(McError::DimensionMismatch(format!(
            "need at least min(n1, n2) = {min_dim} weights, got {}",
            w.len()
        )));
    }
    check_monotone(w.weights())?;
    let f = svd(b)?;
    let shrunk = threshold_spectrum(&f.singular_values, lambda, w.weights(), tau, min_dim);
    let lr = LowRank::from_factors(
        b.n_rows(),
        b.n_cols(),
        &f.left_factors,
        &shrunk,
        &f.right_factors,
    );
    Ok(lr.to_dense())
}

// ── Low-rank iterate representation ─────────────────────────────────

// Sum of rank-one terms sigma_k u_k v_k^T. Factors are orthonormal right
// after a shrink; transient momentum combinations are not, so norms and
// inner products go through the small Gram matrices instead of sigma.
#[derive(Debug, Clone)]
pub(crate) struct LowRank {
    n_rows: usize,
    n_cols: usize,
    u: Vec<f64>,     // n_rows x r, row-major
    sigma: Vec<f64>, // r entries; signs allowed in combinations
    v: Vec<f64>,     // n_cols x r, row-major
}

impl LowRank {
    fn zero(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            u: Vec::new(),
            sigma: Vec::new(),
            v: Vec::new(),
        }
    }

    fn rank(&self) -> usize {
        self.sigma.len()
    }

    // Keeps the first sigma.len() columns of the factor matrices.
    fn from_factors(
        n_rows: usize,
        n_cols: usize,
        left: &DenseMatrix,
        sigma: &[f64],
        right: &DenseMatrix,
    ) -> Self {
        let r = sigma.len();
        let mut u = vec![0.0; n_rows * r];
        let mut v = vec![0.0; n_cols * r];
        for i in 0..n_rows {
            for k in 0..r {
                u[i * r + k] = left.get(i, k);
            }
        }
        for j in 0..n_cols {
            for k in 0..r {
                v[j * r + k] = right.get(j, k);
            }
        }
        Self {
            n_rows,
            n_cols,
            u,
            sigma: sigma.to_vec(),
            v,
        }
    }

    fn from_dense(a: &DenseMatrix) -> Result<Self, McError> {
        let f = svd(a)?;
        let r = f
            .singular_values
            .iter()
            .take_while(|&&s| s > 0.0)
            .count();
        Ok(Self::from_factors(
            a.n_rows(),
            a.n_cols(),
            &f.left_factors,
            &f.singular_values[..r],
            &f.right_factors,
        ))
    }

    fn eval_cell(&self, r: usize, c: usize) -> f64 {
        let k = self.rank();
        let urow = &self.u[r * k..(r + 1) * k];
        let vrow = &self.v[c * k..(c + 1) * k];
        let mut acc = 0.0;
        for ((us, vs), s) in urow.iter().zip(vrow.iter()).zip(self.sigma.iter()) {
            acc += us * s * vs;
        }
        acc
    }

    fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        let r = self.rank();
        for i in 0..self.n_rows {
            for k in 0..r {
                let us = self.u[i * r + k] * self.sigma[k];
                if us == 0.0 {
                    continue;
                }
                for j in 0..self.n_cols {
                    let cur = out.get(i, j);
                    out.set(i, j, cur + us * self.v[j * r + k]);
                }
            }
        }
        out
    }

    // <A, B> through the r x r' factor Grams; valid for non-orthonormal
    // factors as well.
    fn inner(&self, other: &Self) -> f64 {
        let r1 = self.rank();
        let r2 = other.rank();
        if r1 == 0 || r2 == 0 {
            return 0.0;
        }
        let mut gu = vec![0.0; r1 * r2];
        for i in 0..self.n_rows {
            let a = &self.u[i * r1..(i + 1) * r1];
            let b = &other.u[i * r2..(i + 1) * r2];
            for k1 in 0..r1 {
                let ak = a[k1];
                if ak == 0.0 {
                    continue;
                }
                for k2 in 0..r2 {
                    gu[k1 * r2 + k2] += ak * b[k2];
                }
            }
        }
        let mut gv = vec![0.0; r1 * r2];
        for j in 0..self.n_cols {
            let a = &self.v[j * r1..(j + 1) * r1];
            let b = &other.v[j * r2..(j + 1) * r2];
            for k1 in 0..r1 {
                let ak = a[k1];
                if ak == 0.0 {
                    continue;
                }
                for k2 in 0..r2 {
                    gv[k1 * r2 + k2] += ak * b[k2];
                }
            }
        }
        let mut acc = 0.0;
        for k1 in 0..r1 {
            for k2 in 0..r2 {
                acc += self.sigma[k1] * other.sigma[k2] * gu[k1 * r2 + k2] * gv[k1 * r2 + k2];
            }
        }
        acc
    }

    fn frob_norm(&self) -> f64 {
        self.inner(self).max(0.0).sqrt()
    }

    fn frob_distance(&self, other: &Self) -> f64 {
        let d = self.inner(self) - 2.0 * self.inner(other) + other.inner(other);
        d.max(0.0).sqrt()
    }

    // ca * A + cb * B as concatenated rank-one terms.
    fn combine(a: &Self, ca: f64, b: &Self, cb: f64) -> Self {
        debug_assert_eq!((a.n_rows, a.n_cols), (b.n_rows, b.n_cols));
        let ra = a.rank();
        let rb = b.rank();
        let r = ra + rb;
        let mut u = vec![0.0; a.n_rows * r];
        let mut v = vec![0.0; a.n_cols * r];
        let mut sigma = Vec::with_capacity(r);
        for k in 0..ra {
            sigma.push(ca * a.sigma[k]);
        }
        for k in 0..rb {
            sigma.push(cb * b.sigma[k]);
        }
        for i in 0..a.n_rows {
            u[i * r..i * r + ra].copy_from_slice(&a.u[i * ra..(i + 1) * ra]);
            u[i * r + ra..(i + 1) * r].copy_from_slice(&b.u[i * rb..(i + 1) * rb]);
        }
        for j in 0..a.n_cols {
            v[j * r..j * r + ra].copy_from_slice(&a.v[j * ra..(j + 1) * ra]);
            v[j * r + ra..(j + 1) * r].copy_from_slice(&b.v[j * rb..(j + 1) * rb]);
        }
        Self {
            n_rows: a.n_rows,
            n_cols: a.n_cols,
            u,
            sigma,
            v,
        }
    }

    // Y = self * G for a dense n_cols x l block.
    fn apply_block(&self, g: &DenseMatrix) -> DenseMatrix {
        let l = g.n_cols();
        let r = self.rank();
        let mut out = DenseMatrix::zeros(self.n_rows, l);
        if r == 0 {
            return out;
        }
        // T = sigma * (V^T G), r x l
        let mut t = vec![0.0; r * l];
        for j in 0..self.n_cols {
            let vrow = &self.v[j * r..(j + 1) * r];
            let grow = g.row(j);
            for k in 0..r {
                let vk = vrow[k];
                if vk == 0.0 {
                    continue;
                }
                for c in 0..l {
                    t[k * l + c] += vk * grow[c];
                }
            }
        }
        for k in 0..r {
            let s = self.sigma[k];
            for c in 0..l {
                t[k * l + c] *= s;
            }
        }
        for i in 0..self.n_rows {
            let urow = &self.u[i * r..(i + 1) * r];
            for k in 0..r {
                let uk = urow[k];
                if uk == 0.0 {
                    continue;
                }
                for c in 0..l {
                    let cur = out.get(i, c);
                    out.set(i, c, cur + uk * t[k * l + c]);
                }
            }
        }
        out
    }

    // Y = self^T * Q for a dense n_rows x l block.
    fn apply_transpose_block(&self, q: &DenseMatrix) -> DenseMatrix {
        let l = q.n_cols();
        let r = self.rank();
        let mut out = DenseMatrix::zeros(self.n_cols, l);
        if r == 0 {
            return out;
        }
        let mut t = vec![0.0; r * l];
        for i in 0..self.n_rows {
            let urow = &self.u[i * r..(i + 1) * r];
            let qrow = q.row(i);
            for k in 0..r {
                let uk = urow[k];
                if uk == 0.0 {
                    continue;
                }
                for c in 0..l {
                    t[k * l + c] += uk * qrow[c];
                }
            }
        }
        for k in 0..r {
            let s = self.sigma[k];
            for c in 0..l {
                t[k * l + c] *= s;
            }
        }
        for j in 0..self.n_cols {
            let vrow = &self.v[j * r..(j + 1) * r];
            for k in 0..r {
                let vk = vrow[k];
                if vk == 0.0 {
                    continue;
                }
                for c in 0..l {
                    let cur = out.get(j, c);
                    out.set(j, c, cur + vk * t[k * l + c]);
                }
            }
        }
        out
    }

    /// Sorted non-negative spectrum, assuming orthonormal factors (true
    /// for every shrink output).
    fn spectrum(&self) -> Vec<f64> {
        let mut s = self.sigma.clone();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap());
        s
    }
}

// The fixed-point argument B = P_Omega_perp(A) + P_Omega(A0), kept as the
// low-rank iterate plus a sparse correction on the observed cells.
struct CorrectedOperator<'a> {
    base: &'a LowRank,
    cells: &'a [(usize, usize)],
    delta: Vec<f64>,
}

impl<'a> CorrectedOperator<'a> {
    fn build(base: &'a LowRank, obs: &'a MaskedMatrix) -> Self {
        let cells = obs.mask.cells();
        let delta = cells
            .iter()
            .zip(obs.values.iter())
            .map(|(&(r, c), &v)| v - base.eval_cell(r, c))
            .collect();
        Self { base, cells, delta }
    }

    fn apply(&self, g: &DenseMatrix) -> DenseMatrix {
        let mut out = self.base.apply_block(g);
        let l = g.n_cols();
        for (&(r, c), &d) in self.cells.iter().zip(self.delta.iter()) {
            if d == 0.0 {
                continue;
            }
            let grow = g.row(c);
            for col in 0..l {
                let cur = out.get(r, col);
                out.set(r, col, cur + d * grow[col]);
            }
        }
        out
    }

    fn apply_transpose(&self, q: &DenseMatrix) -> DenseMatrix {
        let mut out = self.base.apply_transpose_block(q);
        let l = q.n_cols();
        for (&(r, c), &d) in self.cells.iter().zip(self.delta.iter()) {
            if d == 0.0 {
                continue;
            }
            let qrow = q.row(r);
            for col in 0..l {
                let cur = out.get(c, col);
                out.set(c, col, cur + d * qrow[col]);
            }
        }
        out
    }
}

fn thin_q(m: &DenseMatrix) -> DenseMatrix {
    let qr = m.to_nalgebra().qr();
    DenseMatrix::from_nalgebra(&qr.q())
}

// Randomized subspace iteration for the top-l singular triplets of the
// corrected operator.
fn randomized_svd(
    op: &CorrectedOperator,
    l: usize,
    seed: u64,
) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix), McError> {
    let n1 = op.base.n_rows;
    let n2 = op.base.n_cols;
    let l = l.min(n1).min(n2).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probe = DenseMatrix::new(
        n2,
        l,
        (0..n2 * l)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect(),
    )
    .expect("finite probe");
    let mut q = thin_q(&op.apply(&probe));
    for _ in 0..POWER_ITERS {
        let z = thin_q(&op.apply_transpose(&q));
        q = thin_q(&op.apply(&z));
    }
    let c = op.apply_transpose(&q); // n2 x l, equals (Q^T B)^T
    let f = svd(&c)?;
    // B ~ Q (C^T) = (Q Z) Sigma W^T with svd(C) = W Sigma Z^T.
    let z = f.right_factors; // l x r
    let u = q.matmul(&z);
    Ok((u, f.singular_values, f.left_factors))
}

// One application of the shrink map on either engine path.
fn shrink_step(
    obs: &MaskedMatrix,
    point: &LowRank,
    lambda: f64,
    w: &[f64],
    tau: f64,
    rank_cap: Option<usize>,
    probe_seed: u64,
) -> Result<LowRank, McError> {
    let n1 = obs.n_rows();
    let n2 = obs.n_cols();
    let min_dim = n1.min(n2);
    let cap = rank_cap.unwrap_or(min_dim).min(min_dim);

    if n1 < DENSE_LIMIT && n2 < DENSE_LIMIT {
        // Dense path: overwrite the observed cells and take the exact SVD.
        let mut b = point.to_dense();
        for (&(r, c), &v) in obs.mask.cells().iter().zip(obs.values.iter()) {
            b.set(r, c, v);
        }
        let f = svd(&b)?;
        let shrunk = threshold_spectrum(&f.singular_values, lambda, w, tau, cap);
        return Ok(LowRank::from_factors(
            n1,
            n2,
            &f.left_factors,
            &shrunk,
            &f.right_factors,
        ));
    }

    let op = CorrectedOperator::build(point, obs);
    let mut l = (point.rank() + 8).max(16).min(cap);
    loop {
        let probe = l + OVERSAMPLE;
        let (u, sigma, v) = randomized_svd(&op, probe.min(min_dim), probe_seed)?;
        let shrunk = threshold_spectrum(&sigma, lambda, w, tau, cap);
        // Grow the subspace until some computed direction is fully shrunk,
        // so no surviving direction can be missing.
        if shrunk.len() < sigma.len().min(cap) || l >= cap {
            let out = LowRank::from_factors(n1, n2, &u, &shrunk, &v);
            return Ok(out);
        }
        l = (2 * l).min(cap);
    }
}

// Inner fixed-point loop: iterate the shrink map from `start` until the
// relative Frobenius change drops to `tol` (first iteration always runs).
fn fixed_point_loop(
    obs: &MaskedMatrix,
    start: LowRank,
    lambda: f64,
    w: &[f64],
    tau: f64,
    tol: f64,
    max_iters: usize,
    rank_cap: Option<usize>,
    seed_salt: u64,
) -> Result<(LowRank, usize, bool), McError> {
    let mut current = start;
    let mut iters = 0;
    let mut converged = false;
    while iters < max_iters {
        let next = shrink_step(
            obs,
            &current,
            lambda,
            w,
            tau,
            rank_cap,
            derive_seed(seed_salt, iters as u64, 0),
        )?;
        iters += 1;
        let change = next.frob_distance(&current);
        let base = current.frob_norm();
        let delta = if change == 0.0 {
            0.0
        } else if base == 0.0 {
            f64::INFINITY
        } else {
            change / base
        };
        current = next;
        if delta <= tol {
            converged = true;
            break;
        }
    }
    Ok((current, iters, converged))
}

/// Iterates `A <- (1/(1+tau)) S_lambda^w(P_Omega_perp(A) + P_Omega(A0))`
/// from `warm_start` (default: the zero matrix) until the relative
/// Frobenius change falls below `tol`.
pub fn fixed_point_solve(
    obs: &MaskedMatrix,
    lambda: f64,
    w: &WeightVector,
    tau: f64,
    tol: f64,
    warm_start: Option<&DenseMatrix>,
    max_iters: usize,
) -> Result<FixedPointOutcome, McError> {
    if lambda < 0.0 || tau < 0.0 || tol < 0.0 {
        return Err(McError::InvalidConfig(
            "lambda, tau and tol must be non-negative".into(),
        ));
    }
    let min_dim = obs.n_rows().min(obs.n_cols());
    if w.len() < min_dim {
        return Err(McError::DimensionMismatch(format!(
            "need at least min(n1, n2) = {min_dim} weights, got {}",
            w.len()
        )));
    }
    check_monotone(w.weights())?;
    let start = match warm_start {
        Some(m) => {
            if m.n_rows() != obs.n_rows() || m.n_cols() != obs.n_cols() {
                return Err(McError::DimensionMismatch(
                    "warm start dimensions do not match the observations".into(),
                ));
            }
            LowRank::from_dense(m)?
        }
        None => LowRank::zero(obs.n_rows(), obs.n_cols()),
    };
    let (solution, iterations, converged) = fixed_point_loop(
        obs,
        start,
        lambda,
        w.weights(),
        tau,
        tol,
        max_iters,
        None,
        0xF1DE_D0,
    )?;
    Ok(FixedPointOutcome {
        matrix: solution.to_dense(),
        iterations,
        converged,
    })
}

/// Weights from a reconstruction spectrum: `w_j = sigma_j` up to the
/// numerical rank and zero beyond, so later iterates stay within that rank.
pub fn weights_from_spectrum(sigma: &[f64], len: usize) -> Vec<f64> {
    let r = numerical_rank(sigma, RANK_REL_TOL);
    let mut w = vec![0.0; len];
    for j in 0..r.min(len) {
        w[j] = sigma[j];
    }
    w
}

fn finalize(
    solution: &LowRank,
    lambda_used: f64,
    inner_iterations_total: usize,
    reweight_rounds: usize,
    converged: bool,
    degenerate: bool,
) -> CompletionResult {
    let sigma = solution.spectrum();
    CompletionResult {
        matrix: solution.to_dense(),
        rank: numerical_rank(&sigma, RANK_REL_TOL),
        lambda_used,
        inner_iterations_total,
        reweight_rounds,
        final_singular_values: sigma,
        converged,
        degenerate,
    }
}

/// Iteratively weighted spectral soft-thresholding.
///
/// Starting from the spectrum of a preliminary reconstruction (typically
/// the NNM solution), runs the continuation loop from
/// `lambda_1 = ||P_Omega(A0)||_op` down past
/// `lambda_target = eps_lambda * ||P_Omega(A0)||_op`, both rescaled by the
/// leading weight `w_1`, warm-starting each stage; then performs
/// `reweight_rounds` rounds at fixed lambda, refreshing `w_j = sigma_j` of
/// the current solution before each round.
pub fn wsst(
    obs: &MaskedMatrix,
    preliminary: &CompletionResult,
    cfg: &WsstConfig,
) -> Result<CompletionResult, McError> {
    cfg.validate()?;
    let n1 = obs.n_rows();
    let n2 = obs.n_cols();
    let min_dim = n1.min(n2);

    let mut sigma0 = preliminary.final_singular_values.clone();
    if sigma0.is_empty() {
        sigma0 = svd(&preliminary.matrix)?.singular_values;
    }
    let mut w = weights_from_spectrum(&sigma0, min_dim);

    let zero_result = |lambda: f64| {
        finalize(&LowRank::zero(n1, n2), lambda, 0, cfg.reweight_rounds, true, true)
    };
    if w[0] == 0.0 {
        return Ok(zero_result(0.0));
    }

    let lam_base = obs.operator_norm();
    // The weights carry the scale of the spectrum, so lambda is rescaled
    // by w_1 once; the reweighting rounds keep it fixed.
    let lambda_target = cfg.eps_lambda * lam_base * w[0];
    let mut lambda = lam_base * w[0];

    let mut current = LowRank::zero(n1, n2);
    let mut total_inner = 0usize;
    let mut converged = true;
    let mut stage = 0u64;

    while lambda > lambda_target {
        let (next, iters, ok) = fixed_point_loop(
            obs,
            current,
            lambda,
            &w,
            cfg.tau,
            cfg.tol,
            cfg.max_inner_iters,
            cfg.rank_cap,
            derive_seed(0x575_7, stage, 1),
        )?;
        current = next;
        total_inner += iters;
        converged &= ok;
        lambda *= cfg.q;
        stage += 1;
    }

    for round in 0..cfg.reweight_rounds {
        w = weights_from_spectrum(&current.spectrum(), min_dim);
        if w[0] == 0.0 {
            let mut res = zero_result(lambda);
            res.inner_iterations_total = total_inner;
            res.reweight_rounds = round;
            return Ok(res);
        }
        let (next, iters, ok) = fixed_point_loop(
            obs,
            current,
            lambda,
            &w,
            cfg.tau,
            cfg.tol,
            cfg.max_inner_iters,
            cfg.rank_cap,
            derive_seed(0x575_7, stage + round as u64, 2),
        )?;
        current = next;
        total_inner += iters;
        converged &= ok;
    }

    Ok(finalize(
        &current,
        lambda,
        total_inner,
        cfg.reweight_rounds,
        converged,
        false,
    ))
}

/// Nuclear-norm minimization baseline: accelerated proximal gradient with
/// momentum restarts and lambda-continuation (the mask operator has unit
/// Lipschitz constant, so the gradient step size is one).
pub fn nnm_solve(obs: &MaskedMatrix, cfg: &WsstConfig) -> Result<CompletionResult, McError> {
    cfg.validate()?;
    let n1 = obs.n_rows();
    let n2 = obs.n_cols();
    let min_dim = n1.min(n2);
    let ones = vec![1.0; min_dim];

    let lam_base = obs.operator_norm();
    let lambda_target = cfg.eps_lambda * lam_base;
    if lam_base == 0.0 {
        return Ok(finalize(&LowRank::zero(n1, n2), lambda_target, 0, 0, true, false));
    }

    let mut current = LowRank::zero(n1, n2);
    let mut total_inner = 0usize;
    let mut converged = true;
    let mut lambda = lam_base.max(lambda_target);
    let mut stage = 0u64;

    loop {
        let (next, iters, ok) = apg_stage(
            obs,
            current,
            lambda,
            &ones,
            cfg.tol,
            cfg.max_inner_iters,
            cfg.rank_cap,
            derive_seed(0xA9_6, stage, 3),
        )?;
        current = next;
        total_inner += iters;
        converged &= ok;
        if lambda <= lambda_target {
            break;
        }
        lambda = (lambda * cfg.q).max(lambda_target);
        stage += 1;
    }

    Ok(finalize(&current, lambda_target, total_inner, 0, converged, false))
}

// One continuation stage of accelerated proximal gradient. The prox of
// lambda * ||.||_1 at Y - grad f(Y) is exactly the shrink map applied to Y.
#[allow(clippy::too_many_arguments)]
fn apg_stage(
    obs: &MaskedMatrix,
    start: LowRank,
    lambda: f64,
    ones: &[f64],
    tol: f64,
    max_iters: usize,
    rank_cap: Option<usize>,
    seed_salt: u64,
) -> Result<(LowRank, usize, bool), McError> {
    let mut a_cur = start.clone();
    let mut y = start;
    let mut t = 1.0f64;
    let mut iters = 0;
    let mut converged = false;

    while iters < max_iters {
        let a_next = shrink_step(
            obs,
            &y,
            lambda,
            ones,
            0.0,
            rank_cap,
            derive_seed(seed_salt, iters as u64, 4),
        )?;
        iters += 1;

        let change = a_next.frob_distance(&a_cur);
        let base = a_cur.frob_norm();
        let delta = if change == 0.0 {
            0.0
        } else if base == 0.0 {
            f64::INFINITY
        } else {
            change / base
        };

        // Momentum restart on loss of descent alignment.
        let momentum_dir = LowRank::combine(&a_next, 1.0, &a_cur, -1.0);
        let gradient_dir = LowRank::combine(&y, 1.0, &a_next, -1.0);
        if gradient_dir.inner(&momentum_dir) > 0.0 {
            t = 1.0;
        }

        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        y = LowRank::combine(&a_next, 1.0 + beta, &a_cur, -beta);
        t = t_next;
        a_cur = a_next;

        if delta <= tol {
            converged = true;
            break;
        }
    }
    Ok((a_cur, iters, converged))
}
