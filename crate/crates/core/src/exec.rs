//! Pluggable map over independent work items.

use alloc::vec::Vec;

/// Runs `f(0..n)` and returns the results in index order.
///
/// Implementations may evaluate items concurrently, but must return them in
/// index order so that any reduction over the results is deterministic.
pub trait Executor {
    fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync;
}

/// Evaluates items one after another on the calling thread.
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
