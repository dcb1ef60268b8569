//! Execution strategy for the data-parallel kernels.
//!
//! Every kernel that loops over independent rows, shards or items takes an
//! [`Exec`]. With the `parallel` feature (on by default) the work is spread
//! over the rayon pool; without it only [`Exec::Sequential`] exists and the
//! crate has no rayon dependency. Both strategies produce identical results:
//! per-item work is independent and reductions are merged in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Exec::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Evaluates `f` on `0..n` and collects the results in index order.
    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            Exec::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
        }
    }

    /// Calls `f(row_index, row)` for every `width`-sized row of `data`.
    pub fn for_each_row_mut<F>(self, data: &mut [f64], width: usize, f: F)
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        if width == 0 {
            return;
        }
        match self {
            Exec::Sequential => data
                .chunks_mut(width)
                .enumerate()
                .for_each(|(i, row)| f(i, row)),
            #[cfg(feature = "parallel")]
            Exec::Parallel => data
                .par_chunks_mut(width)
                .enumerate()
                .for_each(|(i, row)| f(i, row)),
        }
    }

    /// Maps `f` over consecutive shards of `items`; results keep shard order.
    pub fn map_shards<I, T, F>(self, items: &[I], shard_len: usize, f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(usize, &[I]) -> T + Sync + Send,
    {
        let shard_len = shard_len.max(1);
        match self {
            Exec::Sequential => items
                .chunks(shard_len)
                .enumerate()
                .map(|(i, s)| f(i * shard_len, s))
                .collect(),
            #[cfg(feature = "parallel")]
            Exec::Parallel => items
                .par_chunks(shard_len)
                .enumerate()
                .map(|(i, s)| f(i * shard_len, s))
                .collect(),
        }
    }

    pub fn is_parallel(self) -> bool {
        self != Exec::Sequential
    }
}
