//! Data-parallel helpers with a sequential fallback.
//!
//! Reductions always split the index range into fixed-size chunks and add the
//! chunk partials in order, so parallel and sequential runs agree bit for bit.

use std::sync::atomic::{AtomicBool, Ordering};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const CHUNK: usize = 4096;

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Route every helper through the sequential path at runtime.
pub fn set_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::SeqCst);
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::SeqCst)
}

/// Run `f` with at most `workers` threads (0 keeps the global pool).
pub fn with_workers<T: Send, F: FnOnce() -> T + Send>(workers: usize, f: F) -> T {
    #[cfg(feature = "parallel")]
    if workers > 0 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            return pool.install(f);
        }
    }
    let _ = workers;
    f()
}

/// Evaluate `f` on `0..n`, preserving order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() && n > 1 {
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Fill `out` block by block; `f(block_index, block)`.
pub fn fill_blocks<F>(out: &mut [f64], block: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    assert!(block > 0);
    #[cfg(feature = "parallel")]
    if is_parallel() && out.len() > CHUNK {
        out.par_chunks_mut(block).enumerate().for_each(|(b, chunk)| f(b, chunk));
        return;
    }
    out.chunks_mut(block).enumerate().for_each(|(b, chunk)| f(b, chunk));
}

/// Deterministic sum of `term(k)` over `0..n`.
pub fn sum<F>(n: usize, term: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partial = |c: usize| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(n);
        let mut s = 0.0;
        for k in lo..hi {
            s += term(k);
        }
        s
    };
    let partials: Vec<f64> = if chunks > 1 {
        map_indexed(chunks, partial)
    } else {
        (0..chunks).map(partial).collect()
    };
    partials.iter().sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    sum(a.len(), |k| a[k] * b[k])
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
