//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) the helpers dispatch to rayon
//! when asked for [`ExecMode::Parallel`]. Without the feature every mode runs
//! sequentially, so callers never need their own `cfg` gates.

use std::ops::Range;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Execution mode for the embarrassingly parallel loops in this crate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

impl ExecMode {
    /// Whether this mode will actually fan out to worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Maps `f` over `items` by value, preserving order.
pub fn map_owned<T, R, F>(mode: ExecMode, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return items.into_par_iter().map(f).collect();
    }
    let _ = mode;
    items.into_iter().map(f).collect()
}

/// Folds over `range` in chunks of `chunk` indices and merges chunk results
/// with `reduce`. Chunk boundaries are identical in both modes, so a
/// deterministic `reduce` yields identical results.
pub fn fold_chunks<R, F, G>(
    mode: ExecMode,
    range: Range<u64>,
    chunk: u64,
    fold: F,
    reduce: G,
) -> Option<R>
where
    R: Send,
    F: Fn(Range<u64>) -> R + Sync + Send,
    G: Fn(R, R) -> R + Sync + Send,
{
    let chunk = chunk.max(1);
    let starts: Vec<u64> = (range.start..range.end).step_by(chunk as usize).collect();
    let end = range.end;
    let pieces = map(mode, &starts, |&lo| fold(lo..(lo + chunk).min(end)));
    pieces.into_iter().reduce(reduce)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map(ExecMode::Sequential, &xs, |x| x * x);
        let b = map(ExecMode::Parallel, &xs, |x| x * x);
        assert_eq!(a, b);

        let sum = |mode| fold_chunks(mode, 0..10_001, 37, |r| r.sum::<u64>(), |a, b| a + b);
        assert_eq!(sum(ExecMode::Sequential), Some(50_005_000));
        assert_eq!(sum(ExecMode::Parallel), Some(50_005_000));
        assert_eq!(
            fold_chunks(ExecMode::Parallel, 5..5, 4, |r| r.count(), |a, b| a + b),
            None
        );
    }
}
