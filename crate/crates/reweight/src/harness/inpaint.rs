//! Image inpainting: complete a rank-truncated grayscale image from a
//! uniform sample of its pixels, with both completers on the same mask.

use super::{uniform_mask, HarnessError};
use crate::mc::{apply_mask, nnm_solve, wsst, CompletionResult, WsstConfig};
use crate::numerics::{derive_seed, svd, DenseMatrix};

#[derive(Debug, Clone)]
pub struct InpaintingOutcome {
    /// The rank-truncated ground truth actually being reconstructed.
    pub truth: DenseMatrix,
    /// Zero-filled observed pixels, for rendering.
    pub observed: DenseMatrix,
    pub nnm: CompletionResult,
    pub wsst: CompletionResult,
    /// Per-pixel absolute differences against the truth.
    pub nnm_diff: DenseMatrix,
    pub wsst_diff: DenseMatrix,
    pub nnm_rel_err: f64,
    pub wsst_rel_err: f64,
}

fn best_rank_approximation(image: &DenseMatrix, rank: usize) -> Result<DenseMatrix, HarnessError> {
    let f = svd(image).map_err(crate::cs::CsError::Numerics)?;
    let kept = rank.min(f.singular_values.len());
    let truncated = crate::numerics::SvdFactorization {
        left_factors: f.left_factors,
        singular_values: f.singular_values[..kept].to_vec(),
        right_factors: f.right_factors,
    };
    Ok(truncated.reconstruct())
}

fn abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let mut out = a.sub(b);
    let entries: Vec<f64> = out.entries().iter().map(|v| v.abs()).collect();
    out = DenseMatrix::new(a.n_rows(), a.n_cols(), entries).expect("finite differences");
    out
}

/// Truncates the image to `truncate_rank`, observes `sample_frac` of the
/// pixels uniformly at random, and reconstructs with NNM and WSST.
pub fn run_inpainting(
    image: &DenseMatrix,
    truncate_rank: usize,
    sample_frac: f64,
    cfg: &WsstConfig,
    seed: u64,
) -> Result<InpaintingOutcome, HarnessError> {
    if image.entries().iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(HarnessError::InvalidParameter(
            "image entries must lie in [0, 1]".into(),
        ));
    }
    let min_dim = image.n_rows().min(image.n_cols());
    if truncate_rank == 0 || truncate_rank > min_dim {
        return Err(HarnessError::InvalidParameter(format!(
            "truncation rank must lie in 1..={min_dim}"
        )));
    }
    if !(sample_frac > 0.0 && sample_frac <= 1.0) {
        return Err(HarnessError::InvalidParameter(
            "sample fraction must lie in (0, 1]".into(),
        ));
    }
    cfg.validate().map_err(HarnessError::Mc)?;

    let truth = best_rank_approximation(image, truncate_rank)?;
    let n_cells =
        ((image.n_rows() * image.n_cols()) as f64 * sample_frac).ceil() as usize;
    let mask = uniform_mask(
        image.n_rows(),
        image.n_cols(),
        n_cells,
        derive_seed(seed, 0, 31),
    );
    let obs = apply_mask(&truth, &mask)?;
    let observed = obs.dense_embedding();

    let nnm = nnm_solve(&obs, cfg)?;
    let ws = wsst(&obs, &nnm, cfg)?;

    let truth_norm = truth.frobenius_norm().max(f64::MIN_POSITIVE);
    let nnm_rel_err = nnm.matrix.sub(&truth).frobenius_norm() / truth_norm;
    let wsst_rel_err = ws.matrix.sub(&truth).frobenius_norm() / truth_norm;
    let nnm_diff = abs_diff(&truth, &nnm.matrix);
    let wsst_diff = abs_diff(&truth, &ws.matrix);

    Ok(InpaintingOutcome {
        truth,
        observed,
        nnm,
        wsst: ws,
        nnm_diff,
        wsst_diff,
        nnm_rel_err,
        wsst_rel_err,
    })
}
