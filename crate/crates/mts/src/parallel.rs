//! Hunt trials spread over a rayon pool.

use mts_core::descent::{hunt_trial, HuntConfig, HuntReport, TrialRecord};
use rayon::prelude::*;

#[derive(Debug, thiserror::Error)]
pub enum HuntError {
    #[error("n must be at least 2")]
    Dimension,
    #[error("trials and jobs must be at least 1")]
    Count,
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Runs trials `0..trials` on `jobs` threads. Each trial draws from its own
/// stream of the seed and the records are merged by trial index, so the
/// report does not depend on `jobs`.
pub fn hunt_parallel(config: &HuntConfig, trials: usize, jobs: usize) -> Result<HuntReport, HuntError> {
    if config.n < 2 {
        return Err(HuntError::Dimension);
    }
    if trials == 0 || jobs == 0 {
        return Err(HuntError::Count);
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let records: Vec<TrialRecord> = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| hunt_trial(config, t))
            .collect()
    });
    Ok(HuntReport::from_records(config, records))
}
