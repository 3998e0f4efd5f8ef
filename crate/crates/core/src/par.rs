//! Data-parallel map used by the batch runner and the Moreau sampler.
//!
//! Results always come back in input order, so every reduction downstream is
//! performed in the same order whichever backend ran the map.

/// Execution backend for data-parallel loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    /// Uses rayon when the `rayon` feature is enabled, otherwise falls back to
    /// sequential execution.
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "rayon") && self == Exec::Parallel
    }
}

pub(crate) fn map_collect<T, R, F>(exec: Exec, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Send + Sync,
{
    #[cfg(feature = "rayon")]
    {
        if exec == Exec::Parallel {
            use rayon::prelude::*;
            return items.into_par_iter().map(f).collect();
        }
    }
    let _ = exec;
    items.into_iter().map(f).collect()
}

pub(crate) fn map_range<R, F>(exec: Exec, len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    #[cfg(feature = "rayon")]
    {
        if exec == Exec::Parallel {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
    }
    let _ = exec;
    (0..len).map(f).collect()
}

/// Configures the global rayon pool. A no-op without the `rayon` feature.
pub fn set_jobs(jobs: usize) {
    #[cfg(feature = "rayon")]
    {
        // Only the first call wins; later calls keep the existing pool.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    #[cfg(not(feature = "rayon"))]
    let _ = jobs;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seq = map_range(Exec::Sequential, 1000, |i| i * i);
        let par = map_range(Exec::Parallel, 1000, |i| i * i);
        assert_eq!(seq, par);
        let v = map_collect(Exec::Parallel, vec![3, 1, 2], |x| x + 1);
        assert_eq!(v, vec![4, 2, 3]);
    }
}
