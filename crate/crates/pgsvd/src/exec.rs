//! Data-parallel execution helpers. The hot loops map an index range to
//! per-item partial results and reduce them in index order, so the floating
//! point reduction order — and therefore every output bit — is identical
//! whether the map runs on rayon or sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `0..n` sequentially. Always available; this is the reference path.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Map `0..n` on the rayon pool, preserving index order in the output.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Sequential fallback used when the `parallel` feature is disabled.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indexed_seq(n, f)
}
