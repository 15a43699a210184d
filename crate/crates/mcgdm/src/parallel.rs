use mcgdm_core::federation::ClientExecutor;
use rayon::prelude::*;

/// Trains the clients of a round on the rayon thread pool.
#[derive(Debug, Clone, Copy, Default)]
pub struct Parallel;

impl ClientExecutor for Parallel {
    fn run<T, F>(&self, n: usize, task: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).into_par_iter().map(task).collect()
    }
}
