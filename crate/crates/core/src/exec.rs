//! Data-parallel map over independent evaluations.
//!
//! With the `parallel` feature and more than one worker, work runs on a
//! dedicated rayon pool; otherwise it runs in order on the calling thread.
//! Results are returned in input order either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// A fixed-size worker pool, or the sequential fallback.
pub struct Executor {
    workers: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Executor").field("workers", &self.workers).finish()
    }
}

impl Executor {
    /// `workers == 0` uses every available core. Without the `parallel`
    /// feature the worker count is always 1.
    pub fn new(workers: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            let workers = if workers == 0 {
                std::thread::available_parallelism().map_or(1, |n| n.get())
            } else {
                workers
            };
            let pool = (workers > 1)
                .then(|| rayon::ThreadPoolBuilder::new().num_threads(workers).build().ok())
                .flatten();
            let workers = if pool.is_some() { workers } else { 1 };
            Self { workers, pool }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = workers;
            Self { workers: 1 }
        }
    }

    pub fn sequential() -> Self {
        Self::new(1)
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Applies `f(index, item)` to every item.
    pub fn map<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(usize, &T) -> U + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            return pool.install(|| items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect());
        }
        items.iter().enumerate().map(|(i, x)| f(i, x)).collect()
    }
}

impl Default for Executor {
    fn default() -> Self {
        Self::sequential()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let items: Vec<u64> = (0..1000).collect();
        for workers in [1, 4] {
            let out = Executor::new(workers).map(&items, |i, x| (i as u64) * 1000 + x * x);
            let expected: Vec<u64> = items.iter().map(|x| x * 1000 + x * x).collect();
            assert_eq!(out, expected);
        }
    }

    #[test]
    fn sequential_has_one_worker() {
        assert_eq!(Executor::sequential().workers(), 1);
    }
}
