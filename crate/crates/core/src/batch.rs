//! Ordered execution of independent jobs.

use rayon::prelude::*;

/// Runs `job(0..count)` with at most `jobs` worker threads and returns the
/// results in index order, so output never depends on the parallelism level.
pub fn run_ordered<T, F>(jobs: usize, count: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if jobs <= 1 || count <= 1 {
        return (0..count).map(job).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&job).collect()),
        Err(_) => (0..count).map(job).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_jobs() {
        let f = |i: usize| (i as u64).wrapping_mul(0x9E37_79B9) % 1000;
        assert_eq!(run_ordered(1, 500, f), run_ordered(8, 500, f));
    }
}
