//! Data-parallel map over independent work items.
//!
//! Offline snapshot solves, GPR fits, and test-sweep evaluations are all
//! embarrassingly parallel. With the `parallel` feature (default) they run
//! on the rayon pool; without it everything stays on one thread. Results
//! are collected in input order either way, so outputs never depend on
//! scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Cap the worker count. Calls after the pool exists are ignored (rayon's
/// global pool is build-once); `None` leaves the default.
pub fn set_max_threads(n: Option<usize>) {
    #[cfg(feature = "parallel")]
    if let Some(threads) = n {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}

/// Map in input order using the configured backend.
pub fn map_collect<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sequential map, always single-threaded. The benches compare this against
/// [`map_collect`] on the same workload.
pub fn map_collect_seq<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree_in_order() {
        let items: Vec<u64> = (0..100).collect();
        let f = |x: &u64| x * x + 1;
        assert_eq!(map_collect(&items, f), map_collect_seq(&items, f));
    }
}
