//! Independent oracles for the integration suites. Nothing here may call
//! into the library's linear-algebra path: the LP oracle enumerates basic
//! feasible points with its own Gaussian elimination, and the eigenvalue
//! oracle is a hand-rolled cyclic Jacobi sweep.

#![allow(dead_code)]

/// Minimum of `sum_i cost_i |t_i|` over `{t : A t = y, t_i = 0 where forced}`
/// by enumerating the basic feasible points of the standard-form LP with
/// split variables `t = p - q`. Returns `None` when no subset of columns
/// reproduces `y` (infeasible).
///
/// Intended for tiny instances only (n <= 6, m <= 4).
pub fn l1_lp_oracle(
    a: &[Vec<f64>],
    y: &[f64],
    costs: &[f64],
    forced_zero: &[bool],
) -> Option<f64> {
    let m = a.len();
    let n = if m > 0 { a[0].len() } else { 0 };
    assert!(n <= 8 && m <= 6, "oracle is for tiny instances");
    assert_eq!(costs.len(), n);
    assert_eq!(forced_zero.len(), n);

    let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();

    // Split columns: index j < n is +a_j (p_j), index n + j is -a_j (q_j).
    let active: Vec<usize> = (0..2 * n).filter(|&c| !forced_zero[c % n]).collect();

    let mut best: Option<f64> = None;

    // The empty subset covers y = 0.
    if y_norm <= 1e-12 {
        best = Some(0.0);
    }

    let mut subset = Vec::new();
    enumerate_subsets(&active, m, &mut subset, &mut |cols: &[usize]| {
        if cols.is_empty() {
            return;
        }
        let Some(z) = solve_ls_checked(a, y, cols, y_norm) else {
            return;
        };
        if z.iter().any(|&v| v < -1e-9) {
            return;
        }
        let obj: f64 = cols
            .iter()
            .zip(z.iter())
            .map(|(&c, &v)| costs[c % a[0].len()] * v.max(0.0))
            .sum();
        best = Some(match best {
            Some(b) if b <= obj => b,
            _ => obj,
        });
    });
    best
}

fn enumerate_subsets(
    pool: &[usize],
    max_size: usize,
    current: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    visit(current);
    if current.len() == max_size {
        return;
    }
    let start = current
        .last()
        .map(|&last| pool.iter().position(|&p| p == last).unwrap() + 1)
        .unwrap_or(0);
    for idx in start..pool.len() {
        current.push(pool[idx]);
        enumerate_subsets(pool, max_size, current, visit);
        current.pop();
    }
}

// Least-squares solve of the selected signed columns against y via the
// normal equations, accepting only consistent systems.
fn solve_ls_checked(
    a: &[Vec<f64>],
    y: &[f64],
    cols: &[usize],
    y_norm: f64,
) -> Option<Vec<f64>> {
    let m = a.len();
    let n = a[0].len();
    let k = cols.len();
    let col = |c: usize, i: usize| -> f64 {
        if c < n {
            a[i][c]
        } else {
            -a[i][c - n]
        }
    };

    // Normal equations G z = b.
    let mut g = vec![vec![0.0; k]; k];
    let mut b = vec![0.0; k];
    for p in 0..k {
        for q in 0..k {
            let mut acc = 0.0;
            for i in 0..m {
                acc += col(cols[p], i) * col(cols[q], i);
            }
            g[p][q] = acc;
        }
        let mut acc = 0.0;
        for i in 0..m {
            acc += col(cols[p], i) * y[i];
        }
        b[p] = acc;
    }
    let z = gauss_solve(&mut g, &mut b)?;

    // Verify consistency of the original system.
    let mut resid = 0.0;
    for i in 0..m {
        let mut row = 0.0;
        for (p, &c) in cols.iter().enumerate() {
            row += col(c, i) * z[p];
        }
        resid += (row - y[i]) * (row - y[i]);
    }
    if resid.sqrt() > 1e-9 * y_norm.max(1.0) {
        return None;
    }
    Some(z)
}

// Gaussian elimination with partial pivoting; `None` on (near-)singular.
fn gauss_solve(g: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let k = b.len();
    let scale = g
        .iter()
        .flat_map(|row| row.iter().map(|v| v.abs()))
        .fold(0.0f64, f64::max)
        .max(1e-300);
    for p in 0..k {
        let (pivot_row, pivot) = (p..k)
            .map(|r| (r, g[r][p].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())?;
        if pivot <= 1e-12 * scale {
            return None;
        }
        g.swap(p, pivot_row);
        b.swap(p, pivot_row);
        for r in (p + 1)..k {
            let f = g[r][p] / g[p][p];
            for c in p..k {
                g[r][c] -= f * g[p][c];
            }
            b[r] -= f * b[p];
        }
    }
    let mut z = vec![0.0; k];
    for p in (0..k).rev() {
        let mut acc = b[p];
        for c in (p + 1)..k {
            acc -= g[p][c] * z[c];
        }
        z[p] = acc / g[p][p];
    }
    Some(z)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(sym: &[Vec<f64>]) -> Vec<f64> {
    let n = sym.len();
    let mut a: Vec<Vec<f64>> = sym.to_vec();
    for _sweep in 0..200 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() < 1e-14 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for i in 0..n {
                    let api = a[p][i];
                    let aqi = a[q][i];
                    a[p][i] = c * api - s * aqi;
                    a[q][i] = s * api + c * aqi;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

pub fn rows_of(m: &reweight::numerics::DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.n_rows()).map(|r| m.row(r).to_vec()).collect()
}

/// Tiny instances (N <= 6, m <= 4) within reach of the LP oracle: the
/// hand instances plus seeded feasible Gaussian systems.
pub fn tiny_corpus() -> Vec<(reweight::numerics::DenseMatrix, Vec<f64>)> {
    use reweight::numerics::{
        derive_seed, gaussian_sensing_matrix, random_sparse_vector, DenseMatrix,
    };
    let mut corpus: Vec<(DenseMatrix, Vec<f64>)> = vec![
        (
            DenseMatrix::from_rows(&[vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]]).unwrap(),
            vec![1.0, 1.0],
        ),
        (
            DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap(),
            vec![1.0],
        ),
        (
            DenseMatrix::from_rows(&[vec![2.0, -1.0, 0.5, 0.0], vec![0.0, 1.0, -1.0, 1.0]])
                .unwrap(),
            vec![1.0, -2.0],
        ),
    ];
    for trial in 0..12u64 {
        let m = 1 + (trial % 4) as usize;
        let n = ((m + 1).max(3) + (trial % 3) as usize).min(6);
        let a = gaussian_sensing_matrix(m, n, derive_seed(404, trial, 0));
        let s = 1 + (trial as usize % m.min(n));
        let x = random_sparse_vector(n, s, derive_seed(404, trial, 1));
        let y = a.matvec(&x);
        corpus.push((a, y));
    }
    corpus
}

pub fn rel_l2_error(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let denom: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    num / denom.max(f64::MIN_POSITIVE)
}
