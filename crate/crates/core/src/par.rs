//! Data-parallel helpers.
//!
//! With the `parallel` feature the closures run on the rayon pool, otherwise
//! sequentially. Results are always collected in index order so the output
//! never depends on the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Evaluates `f(i)` for `i in 0..n` and collects the results in order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Maps a slice element-wise, preserving order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
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

/// Applies `f` to each element of a mutable slice together with its index.
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter_mut().enumerate().for_each(|(i, x)| f(i, x));
    }
}

/// Sums `f(i)` over `0..n` with a fixed chunking so the floating-point result
/// is identical for any thread count.
pub fn sum_range<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    const CHUNK: usize = 4096;
    let chunks = n.div_ceil(CHUNK);
    let partial = map_range(chunks, |c| {
        let end = ((c + 1) * CHUNK).min(n);
        (c * CHUNK..end).map(&f).sum::<f64>()
    });
    partial.into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_preserves_order() {
        let v = map_range(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }

    #[test]
    fn chunked_sum_matches_sequential_grouping() {
        let n = 10_000;
        let f = |i: usize| 1.0 / (i as f64 + 1.0);
        let expected: f64 = (0..n)
            .collect::<Vec<_>>()
            .chunks(4096)
            .map(|c| c.iter().map(|&i| f(i)).sum::<f64>())
            .sum();
        assert_eq!(sum_range(n, f), expected);
    }
}
