//! Order-preserving map over a slice, parallel when the `parallel` feature
//! is on and more than one thread is requested.

pub(crate) enum Pool {
    Inline,
    #[cfg(feature = "parallel")]
    Global,
    #[cfg(feature = "parallel")]
    Owned(rayon::ThreadPool),
}

impl Pool {
    /// `threads == 1` runs inline; `0` uses the global pool.
    pub(crate) fn new(threads: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            match threads {
                1 => Pool::Inline,
                0 => Pool::Global,
                k => rayon::ThreadPoolBuilder::new()
                    .num_threads(k)
                    .build()
                    .map_or(Pool::Inline, Pool::Owned),
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = threads;
            Pool::Inline
        }
    }

    #[cfg(feature = "parallel")]
    pub(crate) fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        use rayon::prelude::*;
        match self {
            _ if items.len() < 2 => items.iter().map(f).collect(),
            Pool::Inline => items.iter().map(f).collect(),
            Pool::Global => items.par_iter().map(f).collect(),
            Pool::Owned(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        }
    }

    #[cfg(not(feature = "parallel"))]
    pub(crate) fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        F: Fn(&T) -> R,
    {
        items.iter().map(f).collect()
    }
}
