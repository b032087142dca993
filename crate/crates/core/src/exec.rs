//! Execution policy for the data-parallel inner loops.
//!
//! Node-wise array work and independent simulations go through these helpers.
//! With the `parallel` feature disabled every path runs sequentially; results
//! are bit-identical either way because no reduction is split across threads.

use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Below this many elements a parallel map costs more than it saves.
const MIN_PARALLEL_LEN: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Fill `out[i] = f(i)`.
pub fn fill_indexed<T, F>(exec: Execution, out: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && out.len() >= MIN_PARALLEL_LEN {
        out.par_iter_mut()
            .with_min_len(MIN_PARALLEL_LEN / 4)
            .enumerate()
            .for_each(|(i, o)| *o = f(i));
        return;
    }
    let _ = exec;
    for (i, o) in out.iter_mut().enumerate() {
        *o = f(i);
    }
}

/// Apply `f(i, &mut item)` to every element.
pub fn for_each_indexed<T, F>(exec: Execution, items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && items.len() >= MIN_PARALLEL_LEN {
        items
            .par_iter_mut()
            .with_min_len(MIN_PARALLEL_LEN / 4)
            .enumerate()
            .for_each(|(i, o)| f(i, o));
        return;
    }
    let _ = exec;
    for (i, o) in items.iter_mut().enumerate() {
        f(i, o);
    }
}

/// Map a list of independent jobs (whole simulations, oracle rows).
pub fn map_jobs<I, T, F>(exec: Execution, jobs: Vec<I>, f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return jobs.into_par_iter().map(f).collect();
    }
    let _ = exec;
    jobs.into_iter().map(f).collect()
}

/// Run two closures, concurrently when allowed.
pub fn join<A, B, RA, RB>(exec: Execution, a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return rayon::join(a, b);
    }
    let _ = exec;
    (a(), b())
}
