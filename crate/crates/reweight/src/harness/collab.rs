//! Collaborative filtering on a ratings dataset: per-user train/test
//! split, completion of the training matrix, relative error on the
//! held-out cells.

use super::{HarnessError, RatingsDataset};
use crate::io::results::{format_float, CsvTable};
use crate::mc::{nnm_solve, wsst, MaskSet, MaskedMatrix, WsstConfig};
use crate::numerics::derive_seed;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct CollabOutcome {
    pub nnm_err: f64,
    pub nnm_rank: usize,
    pub wsst_err: f64,
    pub wsst_rank: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub lambda_used: f64,
}

pub fn outcome_to_csv(o: &CollabOutcome) -> CsvTable {
    let mut t = CsvTable::new(&[
        "solver", "test_err", "rank", "n_train", "n_test", "lambda",
    ]);
    t.push_row(vec![
        "nnm".into(),
        format_float(o.nnm_err),
        o.nnm_rank.to_string(),
        o.n_train.to_string(),
        o.n_test.to_string(),
        format_float(o.lambda_used),
    ]);
    t.push_row(vec![
        "wsst".into(),
        format_float(o.wsst_err),
        o.wsst_rank.to_string(),
        o.n_train.to_string(),
        o.n_test.to_string(),
        format_float(o.lambda_used),
    ]);
    t
}

/// Splits each user's ratings uniformly at random, the ceiling half into
/// the training set and the remainder into the test set.
pub fn split_ratings(d: &RatingsDataset, seed: u64) -> (RatingsDataset, RatingsDataset) {
    // Group record indices per user; dataset order within a user is kept.
    let mut per_user: Vec<Vec<usize>> = vec![Vec::new(); d.n_users()];
    for (idx, &(u, _, _)) in d.records().iter().enumerate() {
        per_user[u].push(idx);
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (user, indices) in per_user.iter().enumerate() {
        if indices.is_empty() {
            continue;
        }
        let take = indices.len().div_ceil(2);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, user as u64, 41));
        let mut picked = rand::seq::index::sample(&mut rng, indices.len(), take).into_vec();
        picked.sort_unstable();
        let picked_set: std::collections::HashSet<usize> = picked.iter().copied().collect();
        for (slot, &rec_idx) in indices.iter().enumerate() {
            if picked_set.contains(&slot) {
                train.push(d.records()[rec_idx]);
            } else {
                test.push(d.records()[rec_idx]);
            }
        }
    }

    let train = RatingsDataset::new(train, d.n_users(), d.n_items())
        .expect("a split of a valid dataset is valid");
    let test = RatingsDataset::new(test, d.n_users(), d.n_items())
        .expect("a split of a valid dataset is valid");
    (train, test)
}

fn masked_from_ratings(d: &RatingsDataset) -> Result<MaskedMatrix, HarnessError> {
    let cells: Vec<(usize, usize)> = d.records().iter().map(|&(u, i, _)| (u, i)).collect();
    let values: Vec<f64> = d.records().iter().map(|&(_, _, r)| r).collect();
    let mask = MaskSet::new(d.n_users(), d.n_items(), cells)?;
    Ok(MaskedMatrix::new(mask, values)?)
}

/// Completes the training matrix with both solvers and reports the
/// relative error on the held-out ratings:
/// `||P_test(A_hat) - P_test(A0)||_2 / ||P_test(A0)||_2`.
pub fn run_collab_filter(
    d: &RatingsDataset,
    cfg: &WsstConfig,
    seed: u64,
) -> Result<CollabOutcome, HarnessError> {
    cfg.validate().map_err(HarnessError::Mc)?;
    if d.is_empty() {
        return Err(HarnessError::InvalidParameter("empty dataset".into()));
    }
    let (train, test) = split_ratings(d, seed);
    if test.is_empty() {
        return Err(HarnessError::EmptyTestSet);
    }

    let obs = masked_from_ratings(&train)?;
    let nnm = nnm_solve(&obs, cfg)?;
    let ws = wsst(&obs, &nnm, cfg)?;

    let test_error = |reconstruction: &crate::numerics::DenseMatrix| -> f64 {
        let mut num = 0.0;
        let mut denom = 0.0;
        for &(u, i, r) in test.records() {
            let p = reconstruction.get(u, i);
            num += (p - r) * (p - r);
            denom += r * r;
        }
        (num / denom).sqrt()
    };

    Ok(CollabOutcome {
        nnm_err: test_error(&nnm.matrix),
        nnm_rank: nnm.rank,
        wsst_err: test_error(&ws.matrix),
        wsst_rank: ws.rank,
        n_train: train.len(),
        n_test: test.len(),
        lambda_used: ws.lambda_used,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_dataset(n_users: usize, n_items: usize, per_user: usize) -> RatingsDataset {
        let mut records = Vec::new();
        for u in 0..n_users {
            for k in 0..per_user {
                let i = (u + k * 3) % n_items;
                let r = 1.0 + ((u + i) % 5) as f64;
                records.push((u, i, r));
            }
        }
        // Duplicates possible for tiny n_items; filter them out.
        let mut seen = std::collections::HashSet::new();
        records.retain(|&(u, i, _)| seen.insert((u, i)));
        RatingsDataset::new(records, n_users, n_items).unwrap()
    }

    #[test]
    fn split_counts_follow_ceiling_rule() {
        let d = synthetic_dataset(6, 20, 20);
        let (train, test) = split_ratings(&d, 5);
        assert_eq!(train.len() + test.len(), d.len());
        let count = |set: &RatingsDataset, user: usize| {
            set.records().iter().filter(|r| r.0 == user).count()
        };
        for u in 0..6 {
            let total = count(&train, u) + count(&test, u);
            assert_eq!(count(&train, u), total.div_ceil(2));
        }
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let d = synthetic_dataset(5, 17, 9);
        let (tr1, te1) = split_ratings(&d, 2);
        let (tr2, _) = split_ratings(&d, 2);
        assert_eq!(tr1.records(), tr2.records());
        let train_set: std::collections::HashSet<(usize, usize)> =
            tr1.records().iter().map(|&(u, i, _)| (u, i)).collect();
        for &(u, i, _) in te1.records() {
            assert!(!train_set.contains(&(u, i)));
        }
    }

    #[test]
    fn odd_count_goes_ceiling_to_train() {
        let d = RatingsDataset::new(
            vec![(0, 0, 3.0), (0, 1, 4.0), (0, 2, 5.0)],
            1,
            3,
        )
        .unwrap();
        let (train, test) = split_ratings(&d, 1);
        assert_eq!(train.len(), 2);
        assert_eq!(test.len(), 1);
    }

    #[test]
    fn collab_filter_runs_end_to_end() {
        let d = synthetic_dataset(12, 15, 10);
        let cfg = WsstConfig {
            tol: 1e-4,
            max_inner_iters: 300,
            reweight_rounds: 8,
            rank_cap: Some(6),
            ..WsstConfig::default()
        };
        let out = run_collab_filter(&d, &cfg, 3).unwrap();
        assert!(out.nnm_err.is_finite());
        assert!(out.wsst_err.is_finite());
        assert!(out.n_test > 0);
        assert!(out.wsst_rank <= 6);
    }

    #[test]
    fn single_rating_user_yields_empty_test_set() {
        let d = RatingsDataset::new(vec![(0, 0, 3.0)], 1, 1).unwrap();
        assert!(matches!(
            run_collab_filter(&d, &WsstConfig::default(), 0),
            Err(HarnessError::EmptyTestSet)
        ));
    }
}
