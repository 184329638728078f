//! Data-parallel execution over batches of independent items.
//!
//! The engine's hot loops are embarrassingly parallel: one tape per graph,
//! one encoding per graph, one training run per sweep cell. [`map_collect`]
//! is the single entry point for all of them. With the `parallel` feature
//! (default) it fans out over rayon; without it, or with
//! [`ExecMode::Sequential`], it runs a plain ordered loop.
//!
//! Outputs are collected in input order and reduced sequentially by the
//! callers, so results are bit-identical across modes and thread counts.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a batch map is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    /// Plain in-order loop on the calling thread.
    Sequential,
    /// Rayon work-stealing pool. Only available with the `parallel` feature.
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            ExecMode::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            ExecMode::Sequential
        }
    }
}

/// Maps `f` over `items`, returning outputs in input order.
pub fn map_collect<T, U, F>(mode: ExecMode, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match mode {
        ExecMode::Sequential => items.iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => items.par_iter().map(f).collect(),
    }
}

/// Maps `f` over indices `0..n`, returning outputs in index order.
pub fn map_indices<U, F>(mode: ExecMode, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => (0..n).into_par_iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_preserves_order() {
        let xs = vec![3u64, 1, 4, 1, 5];
        let out = map_collect(ExecMode::Sequential, &xs, |x| x * 2);
        assert_eq!(out, vec![6, 2, 8, 2, 10]);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_matches_sequential() {
        let xs: Vec<u64> = (0..1000).collect();
        let seq = map_collect(ExecMode::Sequential, &xs, |x| x.wrapping_mul(0x9e37));
        let par = map_collect(ExecMode::Parallel, &xs, |x| x.wrapping_mul(0x9e37));
        assert_eq!(seq, par);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn indices_match_across_modes() {
        let seq = map_indices(ExecMode::Sequential, 64, |i| (i as f64).sqrt());
        let par = map_indices(ExecMode::Parallel, 64, |i| (i as f64).sqrt());
        assert_eq!(seq, par);
    }
}
