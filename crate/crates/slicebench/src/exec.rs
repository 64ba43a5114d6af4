//! Thread-pool executor for per-sample and per-cell jobs.

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use slicebench_core::allocator::Executor;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "SLICEBENCH_THREADS";

pub struct Parallel {
    pool: ThreadPool,
}

impl Parallel {
    /// `threads == 0` lets rayon pick one worker per core.
    pub fn new(threads: usize) -> Self {
        let pool = ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("failed to start worker threads");
        Self { pool }
    }

    /// Worker count from `SLICEBENCH_THREADS`, all cores when unset or
    /// unparsable.
    pub fn from_env() -> Self {
        Self::new(threads_from_env())
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

pub fn threads_from_env() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0)
}

impl Executor for Parallel {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        // indexed collect keeps index order
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
