//! Optional fan-out over independent work items.
//!
//! Results always come back in input order, so reductions performed by the
//! caller are deterministic whatever the worker count.

use std::sync::OnceLock;

use log::warn;
use rayon::prelude::*;

pub const THREADS_ENV: &str = "DECAYRNN_THREADS";

/// Worker count from `DECAYRNN_THREADS` (default 1).
pub fn worker_count() -> usize {
    static COUNT: OnceLock<usize> = OnceLock::new();
    *COUNT.get_or_init(|| match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => n,
            _ => {
                warn!("ignoring {THREADS_ENV}={v:?}; using a single worker");
                1
            }
        },
        Err(_) => 1,
    })
}

fn pool() -> Option<&'static rayon::ThreadPool> {
    static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();
    POOL.get_or_init(|| {
        let n = worker_count();
        if n <= 1 {
            return None;
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()
    })
    .as_ref()
}

/// `items.iter().enumerate().map(f)`, possibly on several workers.
pub fn ordered_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    match pool() {
        Some(p) if items.len() > 1 => p.install(|| items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect()),
        _ => items.iter().enumerate().map(|(i, x)| f(i, x)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let v: Vec<usize> = (0..100).collect();
        assert_eq!(ordered_map(&v, |i, x| i * 1000 + x * 2)[7], 7014);
    }
}
