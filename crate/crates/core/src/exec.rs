//! Replicate execution strategy.
//!
//! Simulation loops hand an index-keyed closure to an [`Executor`]. Every
//! replicate draws from its own RNG substream, so any executor that returns
//! results in index order yields identical output.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Evaluates `f(0), .., f(n - 1)` and returns the results in index order.
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

/// Runs replicates one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
