//! Execution policy for the data-parallel loops.
//!
//! Every parallel loop in the crate maps an index range to independent
//! results and collects them in index order, so the output is identical
//! whichever policy runs it. Without the `parallel` feature, [`Execution::Parallel`]
//! silently runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this build can actually run loops on a thread pool.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }

    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }
}

/// Caps the global worker pool. Returns the thread count actually requested,
/// or `None` when the build is sequential or the pool was already initialised.
pub fn init_thread_pool(threads: Option<usize>) -> Option<usize> {
    #[cfg(feature = "parallel")]
    {
        let n = threads?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .ok()
            .map(|_| n)
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        None
    }
}
