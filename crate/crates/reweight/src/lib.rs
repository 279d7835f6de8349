//! Reconstruction of sparse vectors and low-rank matrices by iterative
//! reweighting.
//!
//! Two solver families live here, together with the diagnostics that
//! explain when they work:
//!
//! * [`cs`] — basis pursuit, weighted basis pursuit and the reweighting
//!   loop for compressed sensing, plus an empirical exact-recovery test
//!   based on stabilization of the reweighted sequence.
//! * [`mc`] — matrix completion by weighted spectral soft-thresholding
//!   (a fixed-point scheme with continuation and weight updates) and a
//!   nuclear-norm baseline solved by accelerated proximal gradient.
//! * [`analysis`] — dual certificates, empirical restricted-isometry and
//!   incoherence constants, and the weight-accuracy condition linking them.
//! * [`harness`] — seeded experiment runners (phase maps, certificate
//!   tracking, inpainting, collaborative filtering) writing CSV/PGM output.
//! * [`io`] — the file formats the runners consume and produce.
//!
//! All randomness is ChaCha8 keyed from caller-supplied `u64` seeds;
//! every runner is a pure function of its `(config, seed)` arguments.

pub mod analysis;
pub mod cs;
pub mod harness;
pub mod io;
pub mod mc;
pub mod numerics;
