//! Trial scheduling. With the `parallel` feature, [`Execution::Parallel`]
//! fans trials out over rayon; otherwise every mode runs in order on the
//! calling thread. Results are always returned in trial order, so the two
//! modes produce identical output.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

/// `f(0), f(1), …, f(trials - 1)`.
pub fn map_trials<T, F>(trials: u64, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..trials).into_par_iter().map(f).collect()
        }
        _ => (0..trials).map(f).collect(),
    }
}

/// Runs `body` on a pool with `threads` workers when `threads` is set.
pub fn with_threads<R: Send>(threads: Option<usize>, body: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(t) = threads {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(t).build() {
            return pool.install(body);
        }
    }
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    body()
}
