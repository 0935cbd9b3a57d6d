//! Data-parallel execution with a sequential fallback.
//!
//! Every parallel stage in the crate goes through these helpers. Results are
//! always collected in input order and reduced sequentially afterwards, so
//! output does not depend on the number of worker threads.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    #[default]
    Parallel,
    Sequential,
}

impl ExecMode {
    /// `Parallel` degrades to sequential execution when the crate is built
    /// without the `parallel` feature.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

/// `f(0..n)` collected in index order.
pub fn map_indices<R, F>(mode: ExecMode, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

/// `f` over a slice, collected in order.
pub fn map_slice<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    map_indices(mode, items.len(), |i| f(&items[i]))
}

/// Run a closure on a pool with `threads` workers (or the global pool when
/// `None`). Used to check worker-count independence.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(t) = threads {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build() {
            return pool.install(f);
        }
    }
    let _ = threads;
    f()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        for mode in [ExecMode::Parallel, ExecMode::Sequential] {
            let v = map_indices(mode, 1000, |i| i * 2);
            assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
        }
    }

    #[test]
    fn modes_agree_on_float_sums() {
        let xs: Vec<f64> = (0..10_000).map(|i| (i as f64).sin()).collect();
        let a: f64 = map_slice(ExecMode::Parallel, &xs, |x| x * 1.5).iter().sum();
        let b: f64 = with_threads(Some(3), || map_slice(ExecMode::Sequential, &xs, |x| x * 1.5).iter().sum());
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
