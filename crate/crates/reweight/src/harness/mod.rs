//! Seeded experiment runners.
//!
//! Every runner is a pure function of its arguments: work items derive
//! their randomness from the base seed through SplitMix64, so grids can be
//! executed in parallel and still produce byte-identical CSV output.
//! Within a work item the compared decoders or completers always consume
//! the same random instance.

mod a0_track;
mod collab;
mod cs_phase;
mod inpaint;
mod mc_phase;

pub use a0_track::{run_a0_tracking, traces_to_csv, A0Trace};
pub use collab::{outcome_to_csv, run_collab_filter, split_ratings, CollabOutcome};
pub use cs_phase::{run_cs_phase_map, RecoveryMap};
pub use inpaint::{run_inpainting, InpaintingOutcome};
pub use mc_phase::{records_to_csv, run_mc_phase, McPhaseRecord};

use crate::cs::CsError;
use crate::io::IoError;
use crate::mc::McError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("repetition {repetition} failed: {source}")]
    Repetition {
        repetition: usize,
        #[source]
        source: Box<HarnessError>,
    },
    #[error("the held-out rating set is empty")]
    EmptyTestSet,
    #[error("duplicate rating for user {user}, item {item}")]
    DuplicateRating { user: usize, item: usize },
    #[error("rating {0} outside [1, 5]")]
    RatingOutOfRange(f64),
    #[error("record ({user}, {item}) outside the {n_users}x{n_items} frame")]
    RecordOutOfRange {
        user: usize,
        item: usize,
        n_users: usize,
        n_items: usize,
    },
    #[error(transparent)]
    Cs(#[from] CsError),
    #[error(transparent)]
    Mc(#[from] McError),
    #[error(transparent)]
    Io(#[from] IoError),
}

/// Ratings with dense zero-based user/item indices.
#[derive(Debug, Clone)]
pub struct RatingsDataset {
    records: Vec<(usize, usize, f64)>,
    n_users: usize,
    n_items: usize,
}

impl RatingsDataset {
    pub fn new(
        records: Vec<(usize, usize, f64)>,
        n_users: usize,
        n_items: usize,
    ) -> Result<Self, HarnessError> {
        let mut seen = std::collections::HashSet::with_capacity(records.len());
        for &(u, i, r) in &records {
            if u >= n_users || i >= n_items {
                return Err(HarnessError::RecordOutOfRange {
                    user: u,
                    item: i,
                    n_users,
                    n_items,
                });
            }
            if !(1.0..=5.0).contains(&r) {
                return Err(HarnessError::RatingOutOfRange(r));
            }
            if !seen.insert((u, i)) {
                return Err(HarnessError::DuplicateRating { user: u, item: i });
            }
        }
        Ok(Self {
            records,
            n_users,
            n_items,
        })
    }

    pub fn records(&self) -> &[(usize, usize, f64)] {
        &self.records
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Uniform-without-replacement observation mask over an `n1 x n2` frame.
pub(crate) fn uniform_mask(
    n1: usize,
    n2: usize,
    n_cells: usize,
    seed: u64,
) -> crate::mc::MaskSet {
    use rand::SeedableRng;
    let total = n1 * n2;
    let n_cells = n_cells.min(total);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut picks = rand::seq::index::sample(&mut rng, total, n_cells).into_vec();
    picks.sort_unstable();
    let cells = picks.into_iter().map(|k| (k / n2, k % n2)).collect();
    crate::mc::MaskSet::new(n1, n2, cells).expect("sampled cells are unique and in range")
}
