//! Deterministic fan-out for independent multi-start runs.

use rayon::prelude::*;

/// Runs `job(0..count)` in parallel and returns the results in index
/// order. `threads = Some(t)` caps the worker count; `None` uses the global
/// rayon pool.
pub fn map_indexed<T, F>(count: usize, threads: Option<usize>, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let run = || (0..count).into_par_iter().map(&job).collect::<Vec<T>>();
    match threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build() {
            Ok(pool) => pool.install(run),
            Err(_) => (0..count).map(&job).collect(),
        },
        None => run(),
    }
}
