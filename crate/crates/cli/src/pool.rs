//! Ensemble worker pool. Members never share mutable state and results
//! come back in input order, so reductions do not depend on scheduling.

use rayon::prelude::*;

pub const THREADS_ENV: &str = "HEATLAB_THREADS";

/// `min(--jobs, HEATLAB_THREADS)`, each defaulting to the machine's
/// parallelism; never below one.
pub fn worker_count(jobs: Option<usize>) -> usize {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    let wanted = jobs.filter(|&n| n > 0).unwrap_or(available);
    cap.map_or(wanted, |c| wanted.min(c)).max(1)
}

/// Runs `work` over `items` on `workers` threads; output order matches
/// input order.
pub fn run_ordered<I, T, F>(items: &[I], workers: usize, work: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync,
{
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(work).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&work).collect()),
        Err(_) => items.iter().map(work).collect(),
    }
}
