//! Batch execution helpers.
//!
//! With the `parallel` feature the batch maps run on the rayon pool; without
//! it (or with [`ExecMode::Sequential`]) they run in order on the calling
//! thread. Results are always returned in input order so downstream
//! reductions are bit-identical across modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

impl ExecMode {
    /// Parallel when compiled with rayon, sequential otherwise.
    pub fn effective(self) -> Self {
        if cfg!(feature = "parallel") {
            self
        } else {
            ExecMode::Sequential
        }
    }
}

pub fn map_indexed<T, F>(mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode.effective() {
        ExecMode::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => (0..n).into_par_iter().map(f).collect(),
        #[cfg(not(feature = "parallel"))]
        ExecMode::Parallel => unreachable!(),
    }
}

/// Sizes the global rayon pool. Only the first call has an effect.
pub fn init_workers(n: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = n;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let a = map_indexed(ExecMode::Sequential, 100, |i| (i as f64).sqrt());
        let b = map_indexed(ExecMode::Parallel, 100, |i| (i as f64).sqrt());
        assert_eq!(a, b);
    }
}
