//! Ordered data-parallel helpers.
//!
//! `par_map` fans independent per-item work out to rayon (when the `parallel`
//! feature is enabled and the execution mode allows it) and collects results
//! in input order. Reductions over the collected vector happen sequentially
//! in the caller, so the numeric result is bit-identical to a sequential run
//! regardless of thread count. The `Sequential` mode forces plain iteration;
//! it exists as a belt-and-suspenders switch for deterministic runs, not
//! because the parallel path is nondeterministic.

use std::sync::atomic::{AtomicU8, Ordering};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecutionMode {
    Sequential,
    Parallel,
}

static MODE: AtomicU8 = AtomicU8::new(1);

pub fn set_execution_mode(mode: ExecutionMode) {
    let v = match mode {
        ExecutionMode::Sequential => 0,
        ExecutionMode::Parallel => 1,
    };
    MODE.store(v, Ordering::Relaxed);
}

pub fn execution_mode() -> ExecutionMode {
    match MODE.load(Ordering::Relaxed) {
        0 => ExecutionMode::Sequential,
        _ => ExecutionMode::Parallel,
    }
}

/// True when rayon should be used right now.
pub fn parallel_enabled() -> bool {
    cfg!(feature = "parallel") && execution_mode() == ExecutionMode::Parallel
}

/// Map `f` over `items`, preserving order.
#[cfg(feature = "parallel")]
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if parallel_enabled() && items.len() > 1 {
        items.par_iter().map(f).collect()
    } else {
        items.iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Map `f` over indices `0..n`, preserving order.
pub fn par_map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    let idx: Vec<usize> = (0..n).collect();
    par_map(&idx, |&i| f(i))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_preserves_order() {
        let items: Vec<usize> = (0..100).collect();
        let out = par_map(&items, |&x| x * 2);
        assert_eq!(out, (0..100).map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn modes_agree() {
        let items: Vec<f64> = (0..256).map(|i| (i as f64).sin()).collect();
        set_execution_mode(ExecutionMode::Sequential);
        let seq: Vec<f64> = par_map(&items, |&x| x.exp() * x);
        set_execution_mode(ExecutionMode::Parallel);
        let par: Vec<f64> = par_map(&items, |&x| x.exp() * x);
        assert_eq!(seq, par);
    }
}
