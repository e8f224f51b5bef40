//! Data-parallel execution backend.
//!
//! Grid kernels are expressed as index maps and chunked reductions so that the
//! rayon and sequential paths produce bit-identical results: sums are always
//! accumulated per fixed-size chunk and the partials combined in index order.
//! The `parallel` cargo feature selects the default backend; [`set_parallel`]
//! switches it at run time (used by the benches to compare both paths in one
//! binary).

use std::sync::atomic::{AtomicBool, Ordering};

static PARALLEL: AtomicBool = AtomicBool::new(cfg!(feature = "parallel"));

const CHUNK: usize = 2048;

pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && PARALLEL.load(Ordering::Relaxed)
}

pub fn set_parallel(on: bool) {
    PARALLEL.store(on && cfg!(feature = "parallel"), Ordering::Relaxed);
}

/// `(0..n).map(f)` over the active backend.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Deterministic chunked sum of `f(0) + ... + f(n-1)`.
pub fn sum_indexed<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunk_sum = |c: usize| {
        let lo = c * CHUNK;
        let hi = ((c + 1) * CHUNK).min(n);
        let mut s = 0.0;
        for i in lo..hi {
            s += f(i);
        }
        s
    };
    let chunks = n.div_ceil(CHUNK);
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        let partials: Vec<f64> = (0..chunks).into_par_iter().map(chunk_sum).collect();
        return partials.iter().sum();
    }
    (0..chunks).map(chunk_sum).sum()
}

/// Index and value of the maximum of `f` over `0..n`; ties break toward the
/// smaller index. Returns `None` when `n == 0` or every value is NaN.
pub fn argmax_indexed<F>(n: usize, f: F) -> Option<(usize, f64)>
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunk_max = |c: usize| {
        let lo = c * CHUNK;
        let hi = ((c + 1) * CHUNK).min(n);
        let mut best: Option<(usize, f64)> = None;
        for i in lo..hi {
            let v = f(i);
            if v.is_nan() {
                continue;
            }
            match best {
                Some((_, b)) if v <= b => {}
                _ => best = Some((i, v)),
            }
        }
        best
    };
    let chunks = n.div_ceil(CHUNK);
    let partials: Vec<Option<(usize, f64)>>;
    #[cfg(feature = "parallel")]
    if parallel_enabled() {
        use rayon::prelude::*;
        partials = (0..chunks).into_par_iter().map(chunk_max).collect();
        return partials.into_iter().flatten().fold(None, combine_max);
    }
    partials = (0..chunks).map(chunk_max).collect();
    partials.into_iter().flatten().fold(None, combine_max)
}

fn combine_max(best: Option<(usize, f64)>, cand: (usize, f64)) -> Option<(usize, f64)> {
    match best {
        Some((_, b)) if cand.1 <= b => best,
        _ => Some(cand),
    }
}
