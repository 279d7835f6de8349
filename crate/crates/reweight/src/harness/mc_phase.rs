//! Matrix-completion phase experiment: reconstruction error and recovered
//! rank of the nuclear-norm baseline and the reweighted solver over a
//! rank grid, on identical instances.

use super::{uniform_mask, HarnessError};
use crate::io::results::{format_float, CsvTable};
use crate::mc::{apply_mask, nnm_solve, wsst, WsstConfig};
use crate::numerics::{derive_seed, standard_gaussian_matrix, DenseMatrix};
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct McPhaseRecord {
    pub rank: usize,
    pub rep: usize,
    pub nnm_err: f64,
    pub nnm_rank: usize,
    pub wsst_err: f64,
    pub wsst_rank: usize,
    pub nnm_converged: bool,
    pub wsst_converged: bool,
}

pub fn records_to_csv(records: &[McPhaseRecord]) -> CsvTable {
    let mut t = CsvTable::new(&[
        "rank",
        "rep",
        "nnm_err",
        "nnm_rank",
        "wsst_err",
        "wsst_rank",
        "nnm_converged",
        "wsst_converged",
    ]);
    for r in records {
        t.push_row(vec![
            r.rank.to_string(),
            r.rep.to_string(),
            format_float(r.nnm_err),
            r.nnm_rank.to_string(),
            format_float(r.wsst_err),
            r.wsst_rank.to_string(),
            (r.nnm_converged as u8).to_string(),
            (r.wsst_converged as u8).to_string(),
        ]);
    }
    t
}

fn relative_error(reconstruction: &DenseMatrix, truth: &DenseMatrix) -> f64 {
    let denom = truth.frobenius_norm();
    let num = reconstruction.sub(truth).frobenius_norm();
    if denom == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / denom
    }
}

/// For each rank `r` in the grid and each repetition, draws `A0 = U V^T`
/// from `n x r` standard Gaussian factors, observes a uniform fraction of
/// its entries, and runs both completers on the same data.
pub fn run_mc_phase(
    n: usize,
    rank_grid: &[usize],
    sample_frac: f64,
    reps: usize,
    cfg: &WsstConfig,
    seed: u64,
) -> Result<Vec<McPhaseRecord>, HarnessError> {
    if rank_grid.is_empty() || reps == 0 {
        return Err(HarnessError::InvalidParameter(
            "rank grid and reps must be non-empty".into(),
        ));
    }
    if let Some(&r) = rank_grid.iter().find(|&&r| r > n) {
        return Err(HarnessError::InvalidParameter(format!(
            "rank {r} exceeds dimension {n}"
        )));
    }
    if !(sample_frac > 0.0 && sample_frac <= 1.0) {
        return Err(HarnessError::InvalidParameter(
            "sample fraction must lie in (0, 1]".into(),
        ));
    }
    cfg.validate().map_err(HarnessError::Mc)?;

    let n_items = rank_grid.len() * reps;
    let results: Vec<Result<McPhaseRecord, HarnessError>> = (0..n_items)
        .into_par_iter()
        .map(|flat| {
            let rank = rank_grid[flat / reps];
            let rep = flat % reps;
            if rank == 0 {
                // The zero matrix is recovered exactly by both solvers.
                return Ok(McPhaseRecord {
                    rank,
                    rep,
                    nnm_err: 0.0,
                    nnm_rank: 0,
                    wsst_err: 0.0,
                    wsst_rank: 0,
                    nnm_converged: true,
                    wsst_converged: true,
                });
            }
            let u = standard_gaussian_matrix(n, rank, derive_seed(seed, flat as u64, 21));
            let v = standard_gaussian_matrix(n, rank, derive_seed(seed, flat as u64, 22));
            let truth = u.matmul(&v.transpose());
            let n_cells = ((n * n) as f64 * sample_frac).ceil() as usize;
            let mask = uniform_mask(n, n, n_cells, derive_seed(seed, flat as u64, 23));
            let obs = apply_mask(&truth, &mask)?;
            let nnm = nnm_solve(&obs, cfg)?;
            let ws = wsst(&obs, &nnm, cfg)?;
            Ok(McPhaseRecord {
                rank,
                rep,
                nnm_err: relative_error(&nnm.matrix, &truth),
                nnm_rank: nnm.rank,
                wsst_err: relative_error(&ws.matrix, &truth),
                wsst_rank: ws.rank,
                nnm_converged: nnm.converged,
                wsst_converged: ws.converged,
            })
        })
        .collect();

    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick_cfg() -> WsstConfig {
        WsstConfig {
            tol: 1e-6,
            max_inner_iters: 800,
            reweight_rounds: 10,
            ..WsstConfig::default()
        }
    }

    #[test]
    fn zero_rank_row_is_exact() {
        let recs = run_mc_phase(12, &[0], 0.5, 2, &quick_cfg(), 3).unwrap();
        for r in &recs {
            assert_eq!(r.nnm_err, 0.0);
            assert_eq!(r.wsst_err, 0.0);
            assert_eq!(r.wsst_rank, 0);
        }
    }

    #[test]
    fn easy_instance_recovers_rank() {
        let recs = run_mc_phase(16, &[1], 0.7, 1, &quick_cfg(), 11).unwrap();
        let r = &recs[0];
        assert!(r.wsst_err < 1e-3, "wsst error {}", r.wsst_err);
        assert_eq!(r.wsst_rank, 1);
        assert!(r.nnm_err >= r.wsst_err - 1e-9);
    }

    #[test]
    fn deterministic_records() {
        let a = run_mc_phase(10, &[1, 2], 0.6, 2, &quick_cfg(), 7).unwrap();
        let b = run_mc_phase(10, &[1, 2], 0.6, 2, &quick_cfg(), 7).unwrap();
        assert_eq!(
            records_to_csv(&a).to_csv_string(),
            records_to_csv(&b).to_csv_string()
        );
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(run_mc_phase(8, &[], 0.5, 1, &quick_cfg(), 0).is_err());
        assert!(run_mc_phase(8, &[9], 0.5, 1, &quick_cfg(), 0).is_err());
        assert!(run_mc_phase(8, &[1], 0.0, 1, &quick_cfg(), 0).is_err());
    }
}
