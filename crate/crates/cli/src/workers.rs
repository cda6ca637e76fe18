//! Worker-count resolution and the shared thread pool.

use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::{CliError, CliResult};

/// Environment variable overriding the configured worker count.
pub const WORKERS_ENV: &str = "STRIPMASK_WORKERS";

/// Resolves the worker count: explicit flag, then [`WORKERS_ENV`], then the
/// config file, then the number of available cores.
pub fn resolve_workers(flag: Option<usize>, config: Option<usize>) -> CliResult<usize> {
    let env = match std::env::var(WORKERS_ENV) {
        Ok(v) if !v.trim().is_empty() => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| CliError::config(format!("{WORKERS_ENV}={v:?} is not a worker count")))?,
        ),
        _ => None,
    };
    let n = flag
        .or(env)
        .or(config)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if n == 0 {
        return Err(CliError::config("worker count must be positive"));
    }
    Ok(n)
}

pub fn build_pool(workers: usize) -> CliResult<ThreadPool> {
    ThreadPoolBuilder::new()
        .num_threads(workers)
        .thread_name(|i| format!("stripmask-{i}"))
        .build()
        .map_err(|e| CliError::config(format!("cannot start {workers} workers: {e}")))
}
