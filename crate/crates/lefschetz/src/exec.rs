//! Execution strategy for embarrassingly parallel batches.
//!
//! Fiber flows and cocycle batches are independent tasks merged by index, so
//! results are identical whichever strategy runs them. With the `parallel`
//! feature (default) work is dispatched to rayon; without it every strategy
//! degrades to the sequential loop.

/// How to run a batch of independent tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parallelism {
    /// One task at a time on the calling thread.
    Sequential,
    /// The rayon default pool (all cores), or sequential without the
    /// `parallel` feature.
    Auto,
    /// A dedicated pool with exactly this many threads.
    Threads(usize),
}

impl Parallelism {
    /// Reads the `LEFSCHETZ_THREADS` variable: unset or `0` selects
    /// [`Parallelism::Auto`], `1` the sequential path, `n` a capped pool.
    /// Unparsable values fall back to `Auto`.
    pub fn from_env() -> Self {
        match std::env::var("LEFSCHETZ_THREADS") {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(0) | Err(_) => Parallelism::Auto,
                Ok(1) => Parallelism::Sequential,
                Ok(n) => Parallelism::Threads(n),
            },
            Err(_) => Parallelism::Auto,
        }
    }
}

/// Maps `f` over `items`, returning results in input order.
pub fn map_indexed<T, U, F>(items: &[T], par: Parallelism, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync,
{
    match par {
        Parallelism::Sequential => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
        #[cfg(feature = "parallel")]
        Parallelism::Auto => {
            use rayon::prelude::*;
            items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
        }
        #[cfg(feature = "parallel")]
        Parallelism::Threads(n) => {
            use rayon::prelude::*;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .expect("thread pool construction");
            pool.install(|| items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect())
        }
        #[cfg(not(feature = "parallel"))]
        _ => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
    }
}
