//! Parallel replica execution with schedule-independent results.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flowsim::SeedSpec;

/// Runs `f` for replicas `0..n` of `master_seed` on `workers` threads (all
/// cores when `None`). Results come back in replica order; on failure the
/// error of the lowest failing replica is returned.
pub fn run_replicas<T, F>(master_seed: u64, n: usize, workers: Option<usize>, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(SeedSpec) -> Result<T> + Sync + Send,
{
    let job = || -> Vec<Result<T>> {
        (0..n as u64)
            .into_par_iter()
            .map(|i| f(SeedSpec::new(master_seed, i)))
            .collect()
    };
    let results = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(job),
        None => job(),
    };
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| match e {
                Error::Resource { .. } => {
                    log::error!("replica {i} of seed {master_seed} failed: {e}");
                    e
                }
                other => other,
            })
        })
        .collect()
}
