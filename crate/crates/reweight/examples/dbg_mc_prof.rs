use reweight::mc::{apply_mask, nnm_solve, wsst, MaskSet, WsstConfig};
use reweight::numerics::{derive_seed, standard_gaussian_matrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    let cfg = WsstConfig {
        eps_lambda: 1e-4,
        q: 0.7,
        reweight_rounds: 50,
        tol: 1e-5,
        tau: 0.0,
        max_inner_iters: 600,
        rank_cap: None,
    };
    for rank in [4usize, 10, 20, 30] {
        let n = 100;
        let u = standard_gaussian_matrix(n, rank, derive_seed(1, 0, 0));
        let v = standard_gaussian_matrix(n, rank, derive_seed(1, 1, 0));
        let truth = u.matmul(&v.transpose());
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(1, 2, 0));
        let cells = rand::seq::index::sample(&mut rng, n * n, 3000)
            .iter()
            .map(|k| (k / n, k % n))
            .collect();
        let mask = MaskSet::new(n, n, cells).unwrap();
        let obs = apply_mask(&truth, &mask).unwrap();

        let t0 = Instant::now();
        let nnm = nnm_solve(&obs, &cfg).unwrap();
        let t1 = Instant::now();
        let ws = wsst(&obs, &nnm, &cfg).unwrap();
        let t2 = Instant::now();
        let nnm_err = nnm.matrix.sub(&truth).frobenius_norm() / truth.frobenius_norm();
        let ws_err = ws.matrix.sub(&truth).frobenius_norm() / truth.frobenius_norm();
        println!(
            "rank {rank}: nnm {:.1?} ({} iters, rank {}, err {:.2e}) | wsst {:.1?} ({} iters, rank {}, err {:.2e})",
            t1 - t0,
            nnm.inner_iterations_total,
            nnm.rank,
            nnm_err,
            t2 - t1,
            ws.inner_iterations_total,
            ws.rank,
            ws_err
        );
    }
}
