//! Parallel execution helpers.
//!
//! Per-node work (residual evaluation, Jacobian row assembly, multi-RHS
//! triangular solves) is embarrassingly parallel; everything here is an
//! order-preserving map, so results are bit-identical whether they run on
//! one thread or many. Reductions (quadrature sums) are deliberately kept
//! sequential by the callers for the same reason.
//!
//! With the `parallel` feature disabled the helpers compile to plain
//! sequential loops. With it enabled, `set_max_threads` (driven by the
//! `CAPCM_THREADS` environment variable in the CLI) caps the rayon pool;
//! a cap of 1 forces the sequential path at runtime, which is what the
//! benchmark suite uses to compare both lanes in a single build.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SERIAL: AtomicBool = AtomicBool::new(false);

/// Cap the number of worker threads. Must be called before the first
/// parallel operation to take effect on the global pool; a cap of 1 also
/// flips a runtime switch so later calls still serialize.
pub fn set_max_threads(cap: usize) {
    if cap <= 1 {
        FORCE_SERIAL.store(true, Ordering::SeqCst);
        return;
    }
    FORCE_SERIAL.store(false, Ordering::SeqCst);
    #[cfg(feature = "parallel")]
    {
        // Ignore the error: the global pool can only be built once.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cap)
            .build_global();
    }
}

/// True when maps will actually fan out over threads.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SERIAL.load(Ordering::SeqCst)
}

/// Order-preserving indexed map over `0..n`.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Order-preserving in-place map over a slice of independent items.
pub fn for_each_mut<T, F>(items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if is_parallel() {
            use rayon::prelude::*;
            items
                .par_iter_mut()
                .enumerate()
                .for_each(|(i, item)| f(i, item));
            return;
        }
    }
    for (i, item) in items.iter_mut().enumerate() {
        f(i, item);
    }
}
