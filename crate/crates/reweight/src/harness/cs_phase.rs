//! Exact-recovery phase map: plain basis pursuit against the reweighted
//! decoder on a grid of (sparsity, measurement-count) cells.

use super::HarnessError;
use crate::cs::{recovery_declared, reweight_iterate, SensingProblem, SolverConfig};
use crate::io::results::{format_float, CsvTable};
use crate::numerics::{derive_seed, gaussian_sensing_matrix, norm2, random_sparse_vector};
use rayon::prelude::*;

/// Paired exact-recovery counts over the `(s, m)` grid.
#[derive(Debug, Clone)]
pub struct RecoveryMap {
    pub s_values: Vec<usize>,
    pub m_values: Vec<usize>,
    /// Recoveries by plain basis pursuit, indexed `[s][m]`.
    pub counts_plain: Vec<Vec<u32>>,
    /// Recoveries by the reweighted decoder, indexed `[s][m]`.
    pub counts_weighted: Vec<Vec<u32>>,
    /// Solver failures per cell; failed repetitions count for neither decoder.
    pub failures: Vec<Vec<u32>>,
    pub repetitions: usize,
    pub eta: f64,
    /// `s * ln(e m / s)` per cell (0 at s = 0), the closed-form
    /// phase-transition threshold overlay.
    pub threshold_curve: Vec<Vec<f64>>,
}

impl RecoveryMap {
    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&[
            "s",
            "m",
            "plain_count",
            "weighted_count",
            "failures",
            "threshold",
        ]);
        for (si, &s) in self.s_values.iter().enumerate() {
            for (mi, &m) in self.m_values.iter().enumerate() {
                t.push_row(vec![
                    s.to_string(),
                    m.to_string(),
                    self.counts_plain[si][mi].to_string(),
                    self.counts_weighted[si][mi].to_string(),
                    self.failures[si][mi].to_string(),
                    format_float(self.threshold_curve[si][mi]),
                ]);
            }
        }
        t
    }
}

fn threshold_value(s: usize, m: usize) -> f64 {
    if s == 0 {
        return 0.0;
    }
    let s = s as f64;
    s * (std::f64::consts::E * m as f64 / s).ln()
}

struct CellOutcome {
    plain: bool,
    weighted: bool,
    failed: bool,
}

fn run_cell(
    n: usize,
    s: usize,
    m: usize,
    epsilon: f64,
    k_weighted: usize,
    eta: f64,
    base_seed: u64,
    cell_id: u64,
) -> CellOutcome {
    let a = gaussian_sensing_matrix(m, n, derive_seed(base_seed, cell_id, 1));
    let x = random_sparse_vector(n, s, derive_seed(base_seed, cell_id, 2));
    let problem = match SensingProblem::from_signal(a, &x) {
        Ok(p) => p,
        Err(_) => {
            return CellOutcome {
                plain: false,
                weighted: false,
                failed: true,
            }
        }
    };
    let cfg = SolverConfig::default();
    // Both decoders consume the same trace, so they see the same (A, x).
    let trace = match reweight_iterate(&problem, epsilon, k_weighted, &cfg, None) {
        Ok(t) => t,
        Err(_) => {
            return CellOutcome {
                plain: false,
                weighted: false,
                failed: true,
            }
        }
    };
    let first = &trace.iterates[0];
    let last = trace.iterates.last().expect("non-empty trace");
    if s == 0 {
        // The zero signal has no relative error; recovery means the
        // decoder returned (numerically) zero.
        let ok_first = norm2(first) <= eta;
        let ok_last = norm2(last) <= eta;
        return CellOutcome {
            plain: ok_first,
            weighted: ok_last,
            failed: false,
        };
    }
    let plain = recovery_declared(first, &x, eta).unwrap_or(false);
    let weighted = recovery_declared(last, &x, eta).unwrap_or(false);
    CellOutcome {
        plain,
        weighted,
        failed: false,
    }
}

/// Runs the paired phase-map experiment. For each `(s, m)` cell and
/// repetition, draws a fresh Gaussian sensing matrix and `s`-sparse
/// signal, decodes with plain basis pursuit and with `k_weighted` rounds
/// of epsilon-reweighting, and counts recoveries at tolerance `eta`.
#[allow(clippy::too_many_arguments)]
pub fn run_cs_phase_map(
    n: usize,
    s_grid: &[usize],
    m_grid: &[usize],
    reps: usize,
    epsilon: f64,
    k_weighted: usize,
    eta: f64,
    seed: u64,
) -> Result<RecoveryMap, HarnessError> {
    if s_grid.is_empty() || m_grid.is_empty() {
        return Err(HarnessError::InvalidParameter("empty grid".into()));
    }
    if let Some(&s) = s_grid.iter().find(|&&s| s > n) {
        return Err(HarnessError::InvalidParameter(format!(
            "sparsity {s} exceeds dimension {n}"
        )));
    }
    if m_grid.contains(&0) || reps == 0 || k_weighted == 0 {
        return Err(HarnessError::InvalidParameter(
            "m, reps and k_weighted must be positive".into(),
        ));
    }
    if !(epsilon > 0.0) || !(eta > 0.0) {
        return Err(HarnessError::InvalidParameter(
            "epsilon and eta must be positive".into(),
        ));
    }

    let n_cells = s_grid.len() * m_grid.len() * reps;
    let outcomes: Vec<CellOutcome> = (0..n_cells)
        .into_par_iter()
        .map(|flat| {
            let rep_block = flat / reps;
            let si = rep_block / m_grid.len();
            let mi = rep_block % m_grid.len();
            run_cell(
                n,
                s_grid[si],
                m_grid[mi],
                epsilon,
                k_weighted,
                eta,
                seed,
                flat as u64,
            )
        })
        .collect();

    let zeros = || vec![vec![0u32; m_grid.len()]; s_grid.len()];
    let mut counts_plain = zeros();
    let mut counts_weighted = zeros();
    let mut failures = zeros();
    for (flat, o) in outcomes.iter().enumerate() {
        let rep_block = flat / reps;
        let si = rep_block / m_grid.len();
        let mi = rep_block % m_grid.len();
        counts_plain[si][mi] += o.plain as u32;
        counts_weighted[si][mi] += o.weighted as u32;
        failures[si][mi] += o.failed as u32;
    }

    let threshold_curve = s_grid
        .iter()
        .map(|&s| m_grid.iter().map(|&m| threshold_value(s, m)).collect())
        .collect();

    Ok(RecoveryMap {
        s_values: s_grid.to_vec(),
        m_values: m_grid.to_vec(),
        counts_plain,
        counts_weighted,
        failures,
        repetitions: reps,
        eta,
        threshold_curve,
    })
}
