//! Data-parallel map helpers.
//!
//! With the `multicore` feature the parallel paths run on rayon; without it
//! every call degrades to a plain sequential loop with identical results.

#[cfg(feature = "multicore")]
pub use rayon::iter::{IndexedParallelIterator, IntoParallelIterator, ParallelIterator};

/// How a map over independent items is executed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Exec {
    #[default]
    Parallel,
    Sequential,
}

/// Maps `f` over `0..n`, collecting results in index order.
pub fn map_range<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "multicore")]
        Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Fallible variant of [`map_range`]; fails if any item fails.
pub fn try_map_range<T, E, F>(exec: Exec, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    match exec {
        #[cfg(feature = "multicore")]
        Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Number of worker threads available to parallel maps.
pub fn threads() -> usize {
    #[cfg(feature = "multicore")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "multicore"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let a = map_range(Exec::Parallel, 100, |i| i * i);
        let b = map_range(Exec::Sequential, 100, |i| i * i);
        assert_eq!(a, b);
    }

    #[test]
    fn try_map_reports_error() {
        let r: Result<Vec<usize>, usize> =
            try_map_range(Exec::Parallel, 10, |i| if i == 7 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(7));
    }
}
