//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) work is spread over the rayon
//! pool; without it, or with [`ExecMode::Sequential`], the same closures
//! run on the calling thread. Results come back in input order either way,
//! and each item is computed by the same code path, so outputs are
//! bit-identical across modes.

/// How independent items (pages, seeds, layouts) are scheduled.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

impl ExecMode {
    /// True when this build actually runs work on a thread pool.
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
    if mode == ExecMode::Parallel {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

/// Applies `f(row_index, row)` to every `width`-wide row of `data`.
pub fn for_each_row<F>(mode: ExecMode, data: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    if mode == ExecMode::Parallel {
        use rayon::prelude::*;
        data.par_chunks_mut(width)
            .enumerate()
            .for_each(|(k, row)| f(k, row));
        return;
    }
    let _ = mode;
    data.chunks_mut(width)
        .enumerate()
        .for_each(|(k, row)| f(k, row));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let xs: Vec<u64> = (0..1000).collect();
        let a = map(ExecMode::Sequential, &xs, |x| x * x + 1);
        let b = map(ExecMode::Parallel, &xs, |x| x * x + 1);
        assert_eq!(a, b);
    }

    #[test]
    fn rows_visited_once() {
        let mut data = vec![0.0; 12];
        for_each_row(ExecMode::Parallel, &mut data, 3, |k, row| {
            for v in row.iter_mut() {
                *v += k as f64;
            }
        });
        assert_eq!(data, vec![0., 0., 0., 1., 1., 1., 2., 2., 2., 3., 3., 3.]);
    }
}
