//! Tracking the weight-accuracy constant along reweighting iterations on a
//! fixed `(m, s)` configuration at the phase transition.

use super::HarnessError;
use crate::cs::{reweight_iterate, SensingProblem, SolverConfig};
use crate::io::results::{format_float, CsvTable};
use crate::numerics::{derive_seed, gaussian_sensing_matrix, random_sparse_vector};
use rayon::prelude::*;

/// Per-repetition diagnostics: `log10 C^k` and the log relative error,
/// one entry per reweighting iteration.
#[derive(Debug, Clone)]
pub struct A0Trace {
    pub c_log10: Vec<f64>,
    pub err_log: Vec<f64>,
}

/// CSV with one row per (repetition, iteration).
pub fn traces_to_csv(traces: &[A0Trace]) -> CsvTable {
    let mut t = CsvTable::new(&["rep", "k", "c_log10", "err_log"]);
    for (rep, trace) in traces.iter().enumerate() {
        for (k, (&c, &e)) in trace.c_log10.iter().zip(trace.err_log.iter()).enumerate() {
            t.push_row(vec![
                rep.to_string(),
                (k + 1).to_string(),
                format_float(c),
                format_float(e),
            ]);
        }
    }
    t
}

/// Runs `reps` independent instances with the ground truth supplied, so
/// each trace carries `C^k` (the weight-accuracy constant of the iterate's
/// weights) next to the reconstruction error.
#[allow(clippy::too_many_arguments)]
pub fn run_a0_tracking(
    n: usize,
    m: usize,
    s: usize,
    reps: usize,
    k_max: usize,
    epsilon: f64,
    seed: u64,
) -> Result<Vec<A0Trace>, HarnessError> {
    if s == 0 || s > n || m == 0 || m > n {
        return Err(HarnessError::InvalidParameter(format!(
            "need 1 <= s <= N and 1 <= m <= N, got s={s}, m={m}, N={n}"
        )));
    }
    if reps == 0 || k_max == 0 {
        return Err(HarnessError::InvalidParameter(
            "reps and k_max must be positive".into(),
        ));
    }

    let results: Vec<Result<A0Trace, HarnessError>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let a = gaussian_sensing_matrix(m, n, derive_seed(seed, rep as u64, 11));
            let x = random_sparse_vector(n, s, derive_seed(seed, rep as u64, 12));
            let p = SensingProblem::from_signal(a, &x)?;
            let cfg = SolverConfig::default();
            let trace = reweight_iterate(&p, epsilon, k_max, &cfg, Some(&x)).map_err(|e| {
                HarnessError::Repetition {
                    repetition: rep,
                    source: Box::new(e.into()),
                }
            })?;
            Ok(A0Trace {
                c_log10: trace.per_iteration_c.iter().map(|c| c.log10()).collect(),
                err_log: trace.per_iteration_error.clone(),
            })
        })
        .collect();

    results.into_iter().collect()
}
