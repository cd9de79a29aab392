//! Independent scenario runs fanned out over a thread pool. Each run owns its
//! world, so results do not depend on scheduling. Without the `parallel`
//! feature everything runs on the calling thread.

use crate::sim::{run_scenario, RunFailure, RunOutput, Scenario};

/// Applies `f` to every item, in parallel when the feature is on. Output
/// order matches input order either way.
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

pub fn seq_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

pub fn run_batch(jobs: &[(Scenario, u64)]) -> Vec<Result<RunOutput, RunFailure>> {
    par_map(jobs, |(s, ticks)| run_scenario(s, *ticks))
}

pub fn run_batch_sequential(jobs: &[(Scenario, u64)]) -> Vec<Result<RunOutput, RunFailure>> {
    seq_map(jobs, |(s, ticks)| run_scenario(s, *ticks))
}
