//! Fan-out of independent paths over worker threads.
//!
//! Paths are grouped into fixed-size shards of consecutive indices. Shard
//! results come back in index order whatever the worker count, so any
//! order-sensitive reduction over them is reproducible.

use std::ops::Range;

use crate::error::{Error, Result};

/// Paths per shard.
pub const SHARD_SIZE: u64 = 64;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "CKMC_WORKERS";

/// How an ensemble is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// On the calling thread.
    Sequential,
    /// On the global thread pool (one worker per core). Without the
    /// `parallel` feature this runs sequentially.
    #[default]
    Parallel,
    /// On a thread pool of the given size.
    Workers(usize),
}

impl Execution {
    /// Worker count from `CKMC_WORKERS` when set and valid.
    pub fn from_env() -> Result<Self> {
        match std::env::var(WORKERS_ENV) {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&w| w > 0)
                .map(Execution::Workers)
                .ok_or_else(|| {
                    Error::Config(format!("{WORKERS_ENV}=`{v}` is not a positive integer"))
                }),
            Err(_) => Ok(Execution::Parallel),
        }
    }
}

/// Consecutive path ranges of at most `SHARD_SIZE` covering `paths`.
pub fn shards(paths: Range<u64>) -> Vec<Range<u64>> {
    let mut out = Vec::new();
    let mut lo = paths.start;
    while lo < paths.end {
        let hi = (lo + SHARD_SIZE).min(paths.end);
        out.push(lo..hi);
        lo = hi;
    }
    out
}

/// Applies `f` to every shard of `paths`, returning results in shard order.
pub fn map_shards<T, F>(paths: Range<u64>, exec: Execution, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Range<u64>) -> Result<T> + Sync + Send,
{
    let parts = shards(paths);
    match exec {
        Execution::Sequential => parts.into_iter().map(f).collect(),
        Execution::Parallel | Execution::Workers(_) => parallel(parts, exec, f),
    }
}

#[cfg(feature = "parallel")]
fn parallel<T, F>(parts: Vec<Range<u64>>, exec: Execution, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Range<u64>) -> Result<T> + Sync + Send,
{
    use rayon::prelude::*;
    let run = || parts.into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match exec {
        Execution::Workers(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {w} workers: {e}")))?
            .install(run),
        _ => run(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel<T, F>(parts: Vec<Range<u64>>, _exec: Execution, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Range<u64>) -> Result<T> + Sync + Send,
{
    parts.into_iter().map(f).collect()
}
