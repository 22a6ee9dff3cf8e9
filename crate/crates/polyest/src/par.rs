//! Data-parallel execution helpers.
//!
//! **Requires crate feature `"parallel"`** for actual parallelism.
//!
//! Every data-parallel inner loop in this crate (Monte-Carlo trials, batch
//! norm evaluation, batch sampling) goes through these functions. With the
//! `parallel` feature enabled (the default) work is dispatched to rayon when
//! the caller passes `parallel = true`; with the feature disabled the flag is
//! ignored and everything runs sequentially, which keeps the dependency tree
//! minimal and gives a baseline for the criterion benches.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..count`, in parallel when requested and available.
pub fn map_indexed<U, F>(parallel: bool, count: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return (0..count).into_par_iter().map(f).collect();
    }
    let _ = parallel;
    (0..count).map(f).collect()
}

/// Fallible variant of [`map_indexed`]; the first error wins.
pub fn try_map_indexed<U, E, F>(parallel: bool, count: usize, f: F) -> Result<Vec<U>, E>
where
    U: Send,
    E: Send,
    F: Fn(usize) -> Result<U, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return (0..count).into_par_iter().map(f).collect();
    }
    let _ = parallel;
    (0..count).map(f).collect()
}

/// Maps `f` over a slice, in parallel when requested and available.
pub fn map_slice<T, U, F>(parallel: bool, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return items.par_iter().map(f).collect();
    }
    let _ = parallel;
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let seq = map_indexed(false, 100, |i| i * i);
        let par = map_indexed(true, 100, |i| i * i);
        assert_eq!(seq, par);
    }

    #[test]
    fn try_map_propagates_error() {
        let r: Result<Vec<usize>, String> =
            try_map_indexed(true, 10, |i| if i == 7 { Err("boom".into()) } else { Ok(i) });
        assert!(r.is_err());
    }
}
