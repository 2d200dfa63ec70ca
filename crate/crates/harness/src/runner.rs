//! Ordered parallel replication.

use rayon::prelude::*;

/// Worker-count cap read from the environment.
pub const THREADS_ENV: &str = "SAFE_EXPLORE_THREADS";

/// Maps `f` over `0..n` in parallel and returns results in index order, so
/// downstream CSV output does not depend on scheduling. Honors
/// `SAFE_EXPLORE_THREADS` when set to a positive integer.
pub fn parallel_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t > 0);
    match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .expect("thread pool")
            .install(|| (0..n).into_par_iter().map(&f).collect()),
        None => (0..n).into_par_iter().map(&f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_index_order() {
        let out = parallel_indexed(64, |i| i * i);
        assert_eq!(out, (0..64).map(|i| i * i).collect::<Vec<_>>());
    }
}
