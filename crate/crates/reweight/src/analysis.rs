//! Certificate and condition machinery for weighted basis pursuit.
//!
//! The exact dual certificate is built from its pre-image `z` in
//! measurement space, so that the tested object `Y0 = A^T z` lies in
//! `im(A^T) = (ker A)^perp` by construction instead of by an
//! ill-conditioned numerical membership test. Validity follows the dual
//! characterization of exact recovery: the weighted certificate matches
//! `sgn(x)` on the support and stays strictly below one off it.

use crate::cs::WeightVector;
use crate::numerics::{svd, DenseMatrix, NumericsError};
use thiserror::Error;

/// Sign agreement tolerance on the support of `x`.
pub const CERTIFICATE_TOL: f64 = 1e-10;
/// Gram systems with a worse condition estimate are reported singular.
pub const SINGULAR_GRAM_CONDITION: f64 = 1e12;
/// Strictness margin for the one-dimensional null-space check.
pub const NULLSPACE_STRICTNESS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("gram matrix numerically singular (condition estimate {condition:.3e})")]
    SingularGram { condition: f64 },
    #[error("kernel dimension {dimension} > 1: exact null-space verification is limited to one dimension")]
    KernelTooLarge { dimension: usize },
    #[error("the signal has empty support")]
    EmptySupport,
    #[error("the signal support is not contained in the weight support")]
    SupportNotCovered,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Exact dual certificate evaluation plus the empirical constants of the
/// instance it was built from.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    /// Pre-image `z` of the certificate: the tested object is `A^T z`.
    pub preimage: Vec<f64>,
    /// `(w * A^T z)_I = sgn(x_I)` within [`CERTIFICATE_TOL`].
    pub sign_match: bool,
    /// `|(w * A^T z)_{I^c}|_inf`.
    pub strict_bound: f64,
    /// Within [`CERTIFICATE_TOL`] of the critical value 1; reported
    /// invalid because the dual characterization needs strict inequality.
    pub borderline: bool,
    /// Sign match and strict bound < 1 (borderline excluded).
    pub valid: bool,
    /// Empirical restricted-isometry constant of `A` on the support.
    pub delta_hat: f64,
    /// Empirical incoherence constant of `A` on the support.
    pub mu_hat: f64,
    /// The weight-accuracy constant `|w_{I^c}|_inf * |(1/w)_I|_2`.
    pub a0_constant: f64,
}

/// `|w_{I^c}|_inf * |(1/w)_I|_2`, with `1/0 = +inf`.
///
/// Zero off-support weights make the condition hold with constant 0; a
/// zero weight inside `I` makes it infinite.
pub fn a0_constant(w: &WeightVector, support: &[usize]) -> f64 {
    let weights = w.weights();
    let in_support = |i: usize| support.contains(&i);
    let mut max_off = 0.0f64;
    let mut off_empty = true;
    for (i, &wi) in weights.iter().enumerate() {
        if !in_support(i) {
            off_empty = false;
            max_off = max_off.max(wi);
        }
    }
    if off_empty || max_off == 0.0 {
        return 0.0;
    }
    let mut inv_sq = 0.0f64;
    for &i in support {
        let wi = weights[i];
        if wi == 0.0 {
            return f64::INFINITY;
        }
        inv_sq += 1.0 / (wi * wi);
    }
    max_off * inv_sq.sqrt()
}

/// True when the weights are accurate enough for the A0 condition:
/// `min_{i in I} |x_i| >= (1 + sqrt(|I|)/C) * ||w - |x|||_inf`.
pub fn weight_accuracy_implies_a0(x: &[f64], w: &WeightVector, c: f64) -> bool {
    assert!(c > 0.0, "the constant C must be positive");
    assert_eq!(x.len(), w.len(), "dimension mismatch");
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0).collect();
    assert!(!support.is_empty(), "the signal support must be non-empty");
    let deviation = x
        .iter()
        .zip(w.weights().iter())
        .fold(0.0f64, |m, (xi, wi)| m.max((wi - xi.abs()).abs()));
    let min_on_support = support
        .iter()
        .map(|&i| x[i].abs())
        .fold(f64::INFINITY, f64::min);
    min_on_support >= (1.0 + (support.len() as f64).sqrt() / c) * deviation
}

fn columns_on(a: &DenseMatrix, support: &[usize]) -> Option<DenseMatrix> {
    if support.is_empty() {
        None
    } else {
        Some(a.select_columns(support))
    }
}

/// Operator norm of `A_I^T A_I - Id`, which equals the largest deviation
/// of `|A_I y|_2^2` from 1 over unit vectors supported on `I`.
pub fn empirical_rip_delta(a: &DenseMatrix, support: &[usize]) -> f64 {
    let Some(a_i) = columns_on(a, support) else {
        return 0.0;
    };
    let gram = a_i.transpose().matmul(&a_i);
    let deviation = gram.sub(&DenseMatrix::identity(support.len()));
    deviation.operator_norm()
}

/// `max_{i not in I} ||A_I^T A_{col i}||_2`; zero when either side is empty.
pub fn empirical_incoherence(a: &DenseMatrix, support: &[usize]) -> f64 {
    let n = a.n_cols();
    let m = a.n_rows();
    let mut max_norm = 0.0f64;
    for i in 0..n {
        if support.contains(&i) {
            continue;
        }
        let mut acc = 0.0;
        for &j in support {
            let mut dot = 0.0;
            for r in 0..m {
                dot += a.get(r, j) * a.get(r, i);
            }
            acc += dot * dot;
        }
        max_norm = max_norm.max(acc.sqrt());
    }
    max_norm
}

// Inverse of the Gram matrix applied through its SVD, with the condition
// estimate surfaced instead of regularized away.
fn gram_solve(a_i: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    let gram = a_i.transpose().matmul(a_i);
    let f = svd(&gram)?;
    let sigma_max = f.singular_values.first().copied().unwrap_or(0.0);
    let sigma_min = f.singular_values.last().copied().unwrap_or(0.0);
    let condition = if sigma_min > 0.0 {
        sigma_max / sigma_min
    } else {
        f64::INFINITY
    };
    if !(condition < SINGULAR_GRAM_CONDITION) {
        return Err(AnalysisError::SingularGram { condition });
    }
    let s = rhs.len();
    let mut out = vec![0.0; s];
    for k in 0..s {
        let mut uy = 0.0;
        for i in 0..s {
            uy += f.left_factors.get(i, k) * rhs[i];
        }
        let coeff = uy / f.singular_values[k];
        for j in 0..s {
            out[j] += coeff * f.right_factors.get(j, k);
        }
    }
    Ok(out)
}

/// Builds the exact dual certificate for `(A, x, w)` and evaluates its
/// validity together with the empirical constants of the instance.
pub fn dual_certificate(
    a: &DenseMatrix,
    x: &[f64],
    w: &WeightVector,
) -> Result<CertificateReport, AnalysisError> {
    assert_eq!(x.len(), a.n_cols(), "signal dimension mismatch");
    assert_eq!(w.len(), a.n_cols(), "weight dimension mismatch");
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] != 0.0).collect();
    if support.is_empty() {
        return Err(AnalysisError::EmptySupport);
    }
    let weights = w.weights();
    if support.iter().any(|&i| weights[i] == 0.0) {
        return Err(AnalysisError::SupportNotCovered);
    }

    let a_i = a.select_columns(&support);
    let rhs: Vec<f64> = support
        .iter()
        .map(|&i| x[i].signum() / weights[i])
        .collect();
    let g = gram_solve(&a_i, &rhs)?;
    // z = A_I (A_I^T A_I)^{-1} (sgn(x)/w)_I, so A^T z ranges over (ker A)^perp.
    let preimage = a_i.matvec(&g);
    let certificate = a.tr_matvec(&preimage);

    let mut sign_dev = 0.0f64;
    for &i in &support {
        sign_dev = sign_dev.max((weights[i] * certificate[i] - x[i].signum()).abs());
    }
    let sign_match = sign_dev <= CERTIFICATE_TOL;

    let mut strict_bound = 0.0f64;
    for i in 0..x.len() {
        if x[i] == 0.0 {
            strict_bound = strict_bound.max((weights[i] * certificate[i]).abs());
        }
    }
    let borderline = (strict_bound - 1.0).abs() <= CERTIFICATE_TOL;
    let valid = sign_match && strict_bound < 1.0 && !borderline;

    Ok(CertificateReport {
        preimage,
        sign_match,
        strict_bound,
        borderline,
        valid,
        delta_hat: empirical_rip_delta(a, &support),
        mu_hat: empirical_incoherence(a, &support),
        a0_constant: a0_constant(w, &support),
    })
}

/// Exact evaluation of the null-space criterion when `ker A_{I_w}` has
/// dimension at most one: both normalized kernel directions must make
/// `||(h/w)_{I_x^c}||_1 + <sgn(x_{I_x}), (h/w)_{I_x}>` strictly positive.
pub fn nullspace_check_1d(
    a: &DenseMatrix,
    x: &[f64],
    w: &WeightVector,
) -> Result<bool, AnalysisError> {
    assert_eq!(x.len(), a.n_cols(), "signal dimension mismatch");
    assert_eq!(w.len(), a.n_cols(), "weight dimension mismatch");
    let weights = w.weights();
    let i_w = w.support();
    // The criterion requires supp(x) inside supp(w) before anything else.
    if (0..x.len()).any(|i| x[i] != 0.0 && weights[i] == 0.0) {
        return Ok(false);
    }
    if i_w.is_empty() {
        return Ok(true);
    }

    let a_w = a.select_columns(&i_w);
    let f = svd(&a_w)?;
    let sigma_max = f.singular_values.first().copied().unwrap_or(0.0);
    let cutoff = sigma_max * 1e-10;
    let rank = f
        .singular_values
        .iter()
        .take_while(|&&s| s > cutoff)
        .count();
    let kernel_dim = i_w.len().saturating_sub(rank);
    if kernel_dim == 0 {
        return Ok(true);
    }
    if kernel_dim > 1 {
        return Err(AnalysisError::KernelTooLarge {
            dimension: kernel_dim,
        });
    }

    // The kernel direction in I_w coordinates (already unit norm). A rank
    // smaller than the factor count only happens for m < |I_w| frames,
    // where the SVD still carries |I_w| right factors... the last one
    // spans the kernel when the dimension is exactly one.
    let k = f.right_factors.n_cols() - 1;
    let h: Vec<f64> = (0..i_w.len()).map(|j| f.right_factors.get(j, k)).collect();

    let expr = |sign: f64| -> f64 {
        let mut acc = 0.0;
        for (j, &i) in i_w.iter().enumerate() {
            let ratio = sign * h[j] / weights[i];
            if x[i] != 0.0 {
                acc += x[i].signum() * ratio;
            } else {
                acc += ratio.abs();
            }
        }
        acc
    };
    Ok(expr(1.0) > NULLSPACE_STRICTNESS && expr(-1.0) > NULLSPACE_STRICTNESS)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wv(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn a0_hand_arithmetic() {
        let c = a0_constant(&wv(&[2.0, 2.0, 0.1]), &[0, 1]);
        assert!((c - 0.1 * (0.25f64 + 0.25).sqrt()).abs() < 1e-12);
        assert!((c - 0.070711).abs() < 1e-6);
    }

    #[test]
    fn a0_zero_off_support() {
        assert_eq!(a0_constant(&wv(&[1.0, 3.0, 0.0]), &[0, 1]), 0.0);
        // Complement empty behaves the same way.
        assert_eq!(a0_constant(&wv(&[1.0, 3.0]), &[0, 1]), 0.0);
    }

    #[test]
    fn a0_zero_weight_inside_support() {
        assert_eq!(a0_constant(&wv(&[0.0, 1.0, 0.5]), &[0, 1]), f64::INFINITY);
    }

    #[test]
    fn weight_accuracy_exact_weights() {
        let x = vec![0.7, 0.0, -1.3];
        let w = wv(&[0.7, 0.0, 1.3]);
        for c in [1e-6, 0.1, 1.0, 100.0] {
            assert!(weight_accuracy_implies_a0(&x, &w, c));
        }
    }

    #[test]
    fn weight_accuracy_direct_substitution() {
        // Requires 1 >= 2 * 0.6, which fails.
        let x = vec![1.0, 0.0];
        let w = wv(&[1.0, 0.6]);
        assert!(!weight_accuracy_implies_a0(&x, &w, 1.0));
    }

    #[test]
    fn weight_accuracy_implies_a0_numerically() {
        // Whenever the sufficient condition holds, the constant itself
        // must satisfy the bound.
        let x = vec![2.0, 0.0, -3.0, 0.0];
        let w = wv(&[2.05, 0.04, 2.96, 0.02]);
        let c = 0.5;
        assert!(weight_accuracy_implies_a0(&x, &w, c));
        assert!(a0_constant(&w, &[0, 2]) <= c);
    }

    #[test]
    fn rip_orthonormal_columns() {
        let a = DenseMatrix::identity(4);
        assert!(empirical_rip_delta(&a, &[0, 2]) < 1e-12);
    }

    #[test]
    fn rip_stretched_columns() {
        // Columns (1,0) and (0,2): eigenvalues of the Gram are 1 and 4.
        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert!((empirical_rip_delta(&a, &[0, 1]) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn rip_single_column() {
        let a = DenseMatrix::from_rows(&[vec![0.5], vec![0.0]]).unwrap();
        assert!((empirical_rip_delta(&a, &[0]) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn incoherence_orthogonal_matrix() {
        let a = DenseMatrix::identity(3);
        assert_eq!(empirical_incoherence(&a, &[1]), 0.0);
    }

    #[test]
    fn incoherence_repeated_column() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!((empirical_incoherence(&a, &[0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn incoherence_empty_complement() {
        let a = DenseMatrix::identity(2);
        assert_eq!(empirical_incoherence(&a, &[0, 1]), 0.0);
    }

    #[test]
    fn certificate_orthogonal_sensing() {
        // With orthogonal A the Gram is the identity and off-support
        // correlations vanish.
        let a = DenseMatrix::identity(4);
        let x = vec![2.0, 0.0, -1.0, 0.0];
        let w = wv(&[2.0, 0.1, 1.0, 0.1]);
        let rep = dual_certificate(&a, &x, &w).unwrap();
        assert!(rep.sign_match);
        assert!(rep.strict_bound < 1e-12);
        assert!(rep.valid);
        assert!(!rep.borderline);
        assert!(rep.delta_hat < 1e-12);
        assert!(rep.mu_hat < 1e-12);
    }

    #[test]
    fn certificate_rejects_uncovered_support() {
        let a = DenseMatrix::identity(3);
        let x = vec![1.0, 0.0, 0.0];
        let w = wv(&[0.0, 1.0, 1.0]);
        assert!(matches!(
            dual_certificate(&a, &x, &w),
            Err(AnalysisError::SupportNotCovered)
        ));
    }

    #[test]
    fn certificate_singular_gram() {
        // Duplicate support columns make the Gram exactly singular.
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let x = vec![1.0, 1.0, 0.0];
        let w = wv(&[1.0, 1.0, 1.0]);
        assert!(matches!(
            dual_certificate(&a, &x, &w),
            Err(AnalysisError::SingularGram { .. })
        ));
    }

    #[test]
    fn nullspace_vacuous_when_injective() {
        let a = DenseMatrix::identity(3);
        let x = vec![1.0, 0.0, 0.0];
        assert!(nullspace_check_1d(&a, &x, &wv(&[1.0, 1.0, 1.0])).unwrap());
    }

    #[test]
    fn nullspace_boundary_instance_fails() {
        // Kernel direction (1,-1)/sqrt(2); one sign evaluates to zero, so
        // the minimizer is not unique.
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let x = vec![1.0, 0.0];
        assert!(!nullspace_check_1d(&a, &x, &wv(&[1.0, 1.0])).unwrap());
    }

    #[test]
    fn nullspace_weighted_instance_succeeds() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        let x = vec![1.0, 0.0];
        assert!(nullspace_check_1d(&a, &x, &wv(&[2.0, 1.0])).unwrap());
    }

    #[test]
    fn nullspace_kernel_too_large() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0, 1.0]]).unwrap();
        let x = vec![1.0, 0.0, 0.0];
        assert!(matches!(
            nullspace_check_1d(&a, &x, &wv(&[1.0, 1.0, 1.0])),
            Err(AnalysisError::KernelTooLarge { dimension: 2 })
        ));
    }
}
