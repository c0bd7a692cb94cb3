//! Data-parallel helpers. With the `parallel` feature (the default) these
//! fan out over rayon; without it they fall back to plain iteration. Both
//! paths produce identical, order-preserving results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Cap the global thread pool from the RISKROUTE_THREADS environment
/// variable. No-op without the `parallel` feature or if the pool was
/// already initialized.
pub fn init_thread_pool_from_env() {
    #[cfg(feature = "parallel")]
    if let Ok(v) = std::env::var("RISKROUTE_THREADS") {
        if let Ok(n) = v.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}
