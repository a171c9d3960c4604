//! Exploratory machine learning.
//!
//! The library trains kernel classifiers that may abstain instead of
//! guessing, spends a fixed query budget to discover which of several
//! candidate feature sources resolves the abstained region best, and
//! stacks the original and augmented models into a two-layer cascade
//! that emits `positive`, `negative`, or `unknown` per sample.
//!
//! Modules are layered bottom-up:
//!
//! * [`kernel`]: Gaussian kernel, bandwidth heuristic, Gram matrices.
//! * [`rejection`]: rejection losses, model training, prediction.
//! * [`data`]: training/test containers, synthetic generator, CSV
//!   loading, and the metered [`data::FeatureOracle`].
//! * [`acquisition`]: uniform and median-elimination budget allocation.
//! * [`cascade`]: the two-layer combined predictor.
//! * [`harness`]: experiment configs, repetitions, reports.

pub mod acquisition;
pub mod cascade;
pub mod data;
mod error;
pub mod harness;
pub mod kernel;
mod parallel;
pub mod rejection;
mod solver;

pub use error::{Error, Result};

/// Caps the global worker pool. Call once, before any parallel work;
/// rayon rejects reconfiguration after the pool has started.
#[cfg(feature = "parallel")]
pub fn configure_threads(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Sequential build: every computation already runs on one thread, so
/// the cap is accepted and ignored.
#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_threads: usize) -> Result<()> {
    Ok(())
}
