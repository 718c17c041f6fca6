use rayon::ThreadPool;

use crate::error::{BenchError, Result};

pub const THREADS_VAR: &str = "CTMC_THREADS";

/// Worker pool sized by `CTMC_THREADS`, or by the available cores when unset.
pub fn worker_pool() -> Result<ThreadPool> {
    let threads = match std::env::var(THREADS_VAR) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => n,
            _ => return Err(BenchError::Usage(format!("{THREADS_VAR} must be a positive integer, got {v:?}"))),
        },
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| BenchError::Usage(format!("cannot start worker pool: {e}")))
}
