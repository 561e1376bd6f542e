//! Work-distribution abstraction. Results are always returned in index
//! order, so the choice of executor never changes an outcome.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluate `f(0), f(1), ..., f(n - 1)` and return the results in order.
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync;

    fn workers(&self) -> usize {
        1
    }
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync,
    {
        (0..n).map(f).collect()
    }
}
