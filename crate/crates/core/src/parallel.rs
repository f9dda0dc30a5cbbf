//! Data-parallel map helper with a sequential fallback.
//!
//! Requires the crate feature `parallel` (enabled by default) for the rayon
//! implementation; without it, [`map_indexed`] degrades to the sequential
//! loop. Results are collected in index order either way, so aggregation is
//! deterministic regardless of thread count. Callers that derive per-index
//! RNG seeds therefore produce bit-identical output in both builds.

/// Map `f` over `0..n` and collect results in index order, in parallel when
/// the `parallel` feature is enabled.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Map `f` over `0..n` and collect results in index order, in parallel when
/// the `parallel` feature is enabled.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indexed_serial(n, f)
}

/// Always-sequential variant, kept available for benchmarking the parallel
/// speedup against the same workload.
pub fn map_indexed_serial<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}
