//! Order-preserving data-parallel map.
//!
//! Every parallel region in the crate goes through [`Exec`], so results are
//! collected in input order and any reduction happens sequentially afterwards.
//! That keeps outputs identical for every job count. Without the `parallel`
//! feature, or with `jobs == 1`, everything runs on the calling thread.

#[cfg(feature = "parallel")]
use std::sync::Arc;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::Result;

#[derive(Clone)]
pub struct Exec {
    jobs: usize,
    #[cfg(feature = "parallel")]
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for Exec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Exec").field("jobs", &self.jobs).finish()
    }
}

impl Default for Exec {
    fn default() -> Self {
        Self::sequential()
    }
}

impl Exec {
    pub fn sequential() -> Self {
        Self {
            jobs: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    /// Executor with `jobs` worker threads; `0` means one per available core.
    pub fn with_jobs(jobs: usize) -> Result<Self> {
        let jobs = if jobs == 0 { available_cores() } else { jobs };
        if jobs == 1 {
            return Ok(Self::sequential());
        }
        #[cfg(feature = "parallel")]
        {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| crate::error::Error::Config(format!("thread pool: {e}")))?;
            Ok(Self {
                jobs,
                pool: Some(Arc::new(pool)),
            })
        }
        #[cfg(not(feature = "parallel"))]
        {
            log::debug!("built without `parallel`; ignoring jobs={jobs}");
            Ok(Self::sequential())
        }
    }

    pub fn jobs(&self) -> usize {
        self.jobs
    }

    /// Maps `f` over `0..n`, returning results in index order.
    pub fn map_range<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            return pool.install(|| (0..n).into_par_iter().map(&f).collect());
        }
        (0..n).map(f).collect()
    }

    /// Maps `f` over a slice, returning results in slice order.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        self.map_range(items.len(), |i| f(&items[i]))
    }
}

pub fn available_cores() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_for_any_job_count() {
        let expected: Vec<usize> = (0..1000).map(|i| i * i).collect();
        for jobs in [1, 2, 4, 7] {
            let exec = Exec::with_jobs(jobs).unwrap();
            assert_eq!(exec.map_range(1000, |i| i * i), expected);
        }
    }
}
