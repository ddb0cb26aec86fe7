//! Parallel execution of independent trials.
//!
//! Trial `t` of a run with seed `s` draws from stream `(s, t)`; results are
//! returned in trial order, so output does not depend on the worker count.

use rayon::prelude::*;
use smoothloc_core::RngSeed;

use crate::error::{Error, Result};

/// Stream for sub-purpose `purpose` of trial `trial`.
pub fn trial_seed(seed: u64, trial: u64, purpose: u64) -> RngSeed {
    RngSeed::new(seed, trial).derive(purpose)
}

/// Runs `f(0..count)` on `threads` workers and returns the results in index order.
pub fn run_indexed<T, F>(count: usize, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))?;
    Ok(pool.install(|| (0..count).into_par_iter().map(&f).collect()))
}
