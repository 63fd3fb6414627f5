//! Execution strategy for data-parallel loops.
//!
//! Every batch entry point takes an [`Exec`]. With the `parallel` feature the
//! default is [`Exec::Parallel`] (rayon); without it, `Parallel` silently
//! degrades to the sequential path so callers never need their own `cfg`.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    Parallel,
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel
        } else {
            Exec::Sequential
        }
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Calls `f(row_index, row)` for each `row_len`-sized chunk of `buf`.
pub fn for_each_row<F>(exec: Exec, buf: &mut [u8], row_len: usize, f: F)
where
    F: Fn(usize, &mut [u8]) + Sync + Send,
{
    if row_len == 0 {
        return;
    }
    match exec {
        #[cfg(feature = "parallel")]
        Exec::Parallel => buf.par_chunks_mut(row_len).enumerate().for_each(|(y, row)| f(y, row)),
        _ => buf.chunks_mut(row_len).enumerate().for_each(|(y, row)| f(y, row)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_strategies_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let a = map(Exec::Sequential, &items, |x| x * x);
        let b = map(Exec::Parallel, &items, |x| x * x);
        assert_eq!(a, b);

        let mut r1 = vec![0u8; 12];
        let mut r2 = vec![0u8; 12];
        for_each_row(Exec::Sequential, &mut r1, 4, |y, row| row.fill(y as u8));
        for_each_row(Exec::Parallel, &mut r2, 4, |y, row| row.fill(y as u8));
        assert_eq!(r1, r2);
        assert_eq!(r1, vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2]);
    }
}
