//! Dispatch helpers for the data-parallel batch loops.
//!
//! With the `parallel` feature (default) the mapping helpers run on rayon;
//! without it they fall back to plain sequential loops. Reductions over large
//! index ranges use fixed-size chunking so results do not depend on the thread
//! count or scheduling.

/// Chunk length for deterministic range reductions.
pub(crate) const CHUNK: usize = 1 << 14;

#[cfg(feature = "parallel")]
pub(crate) fn map_range<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_range<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    (0..len).map(f).collect()
}

/// Fallible mapping; returns the first error in index order.
pub(crate) fn try_map_range<T, E, F>(len: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    let results = map_range(len, f);
    results.into_iter().collect()
}

/// Sums `f(i)` over `0..len` with Neumaier compensation, chunked so the
/// result is identical for the sequential and parallel paths.
pub(crate) fn compensated_sum_range<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = len.div_ceil(CHUNK);
    let partials = map_range(chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(len);
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for i in lo..hi {
            let v = f(i);
            let t = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - t) + v;
            } else {
                comp += (v - t) + sum;
            }
            sum = t;
        }
        sum + comp
    });
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in partials {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Minimum of `f(i)` over `0..len`; ties resolve to the lowest index.
pub(crate) fn min_by_value_range<F>(len: usize, f: F) -> Option<(usize, f64)>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    if len == 0 {
        return None;
    }
    let chunks = len.div_ceil(CHUNK);
    let partials = map_range(chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(len);
        let mut best = (lo, f(lo));
        for i in lo + 1..hi {
            let v = f(i);
            if v < best.1 {
                best = (i, v);
            }
        }
        best
    });
    partials
        .into_iter()
        .reduce(|a, b| if b.1 < a.1 { b } else { a })
}
