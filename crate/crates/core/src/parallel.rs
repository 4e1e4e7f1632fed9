//! Worker pool abstraction. With the `parallel` feature and more than one
//! worker, index-parallel maps run on a dedicated rayon pool; otherwise they
//! run inline. Every map returns results in index order, so callers that
//! reduce the output sequentially get identical bits on either path.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Environment variable consulted for the default worker count.
pub const WORKERS_ENV: &str = "SQUADMDS_WORKERS";

pub struct Workers {
    count: usize,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Workers {
    pub fn sequential() -> Self {
        Workers {
            count: 1,
            #[cfg(feature = "parallel")]
            pool: None,
        }
    }

    /// A pool of `count` workers. Without the `parallel` feature this is
    /// always the sequential path.
    pub fn new(count: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            if count > 1 {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(count).build().ok();
                if let Some(pool) = pool {
                    return Workers { count, pool: Some(pool) };
                }
                log::warn!("could not build a {count}-thread pool, running sequentially");
            }
        }
        let _ = count;
        Self::sequential()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_parallel(&self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }

    /// `(0..n).map(f).collect()`, possibly spread over the pool.
    pub fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            return pool.install(|| (0..n).into_par_iter().map(&f).collect());
        }
        (0..n).map(f).collect()
    }

    /// Calls `f(chunk_index, chunk)` on consecutive `chunk_len`-sized chunks
    /// of `data`.
    pub fn for_each_chunk<T, F>(&self, data: &mut [T], chunk_len: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        let chunk_len = chunk_len.max(1);
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            pool.install(|| data.par_chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c)));
            return;
        }
        data.chunks_mut(chunk_len).enumerate().for_each(|(i, c)| f(i, c));
    }
}

impl Default for Workers {
    fn default() -> Self {
        Self::sequential()
    }
}

/// Worker count from [`WORKERS_ENV`], falling back to the machine's
/// available parallelism.
pub fn default_worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}
