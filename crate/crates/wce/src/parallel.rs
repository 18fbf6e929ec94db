//! Rayon-backed [`Executor`].

use rayon::prelude::*;
use wce_core::Executor;

/// Environment variable that overrides the worker count.
pub const THREADS_ENV: &str = "WCE_THREADS";

/// Runs batches on a dedicated rayon pool.
///
/// Results come back in index order, and every work item draws its random
/// numbers from its own counter-based stream, so the thread count never
/// changes an output bit.
pub struct RayonExecutor {
    pool: rayon::ThreadPool,
}

impl RayonExecutor {
    pub fn new(threads: usize) -> anyhow::Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build()?;
        Ok(Self { pool })
    }

    /// Pool sized by `WCE_THREADS`, or by rayon's default when unset.
    pub fn from_env() -> anyhow::Result<Self> {
        match std::env::var(THREADS_ENV) {
            Ok(v) => {
                let n: usize = v
                    .trim()
                    .parse()
                    .map_err(|_| anyhow::anyhow!("{THREADS_ENV}={v:?} is not a thread count"))?;
                anyhow::ensure!(n > 0, "{THREADS_ENV} must be positive");
                Self::new(n)
            }
            Err(_) => Self::new(rayon::current_num_threads()),
        }
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for RayonExecutor {
    fn map<T, F>(&self, count: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..count).into_par_iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use wce_core::Sequential;

    #[test]
    fn preserves_index_order() {
        let ex = RayonExecutor::new(4).unwrap();
        assert_eq!(ex.threads(), 4);
        let par = ex.map(1000, |i| i * i);
        assert_eq!(par, Sequential.map(1000, |i| i * i));
    }
}
