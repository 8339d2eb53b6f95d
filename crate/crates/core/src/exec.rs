//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the helpers run on the global rayon
//! pool; without it they are plain loops. Every helper partitions work by
//! output element and each element is reduced sequentially in index order,
//! so results are bitwise identical across backends and thread counts.
//! Reductions across elements (sums of per-row values) are always done by
//! the caller over the returned `Vec`, in index order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Name of the compiled backend, used to label reports and benchmarks.
pub const BACKEND: &str = if cfg!(feature = "parallel") {
    "rayon"
} else {
    "sequential"
};

// Below this many items the split overhead dominates on small batches.
#[cfg(feature = "parallel")]
const MIN_PAR_LEN: usize = 8;

/// Evaluate `f(i)` for `i in 0..n`, returning results in index order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().with_min_len(MIN_PAR_LEN).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Run `f(row_index, row)` over consecutive `width`-sized rows of `data`.
pub fn for_each_row_mut<T, F>(data: &mut [T], width: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(width)
            .with_min_len(MIN_PAR_LEN)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
}

/// Index of the best candidate under `better(a, b)` among `candidates`,
/// where `score` may return `None` to skip a candidate.
///
/// Ties go to the lowest index. The selection is a total order on
/// `(score, index)`, so the answer does not depend on how work is split.
pub fn select_best<F>(n: usize, score: F, maximize: bool) -> Option<(usize, f64)>
where
    F: Fn(usize) -> Option<f64> + Sync + Send,
{
    let pick = |a: Option<(usize, f64)>, b: Option<(usize, f64)>| match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => {
            let b_wins = if maximize { b.1 > a.1 } else { b.1 < a.1 };
            if b_wins || (b.1 == a.1 && b.0 < a.0) {
                Some(b)
            } else {
                Some(a)
            }
        }
    };
    #[cfg(feature = "parallel")]
    {
        (0..n)
            .into_par_iter()
            .with_min_len(256)
            .map(|i| score(i).map(|s| (i, s)))
            .reduce(|| None, pick)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(|i| score(i).map(|s| (i, s))).fold(None, pick)
    }
}

/// Run independent jobs, returning their results in input order.
pub fn map_jobs<I, T, F>(jobs: Vec<I>, f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        jobs.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        jobs.into_iter().map(f).collect()
    }
}
