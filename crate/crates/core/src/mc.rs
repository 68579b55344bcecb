//! Block-parallel Monte-Carlo drivers.
//!
//! `n` replications are cut into blocks of [`BLOCK_LEN`]; block `b` draws from
//! `stream.substream(b)`. Blocks run on the rayon pool and their partial
//! results are reduced in block order, so output depends only on
//! `(stream, n)` and never on the number of worker threads.

use rayon::prelude::*;

use crate::rng::{RngStream, StreamRng};

pub const BLOCK_LEN: u64 = 2048;

fn block_count(n: u64) -> u64 {
    n.div_ceil(BLOCK_LEN)
}

fn block_len(n: u64, block: u64) -> u64 {
    BLOCK_LEN.min(n - block * BLOCK_LEN)
}

/// Folds `n` replications into one accumulator.
///
/// `step` is called once per replication with the block's generator and a
/// per-block scratch value produced by `scratch`. Block accumulators are
/// merged left to right with `merge`.
pub fn fold_replications<A, S, I, F, M>(n: u64, stream: RngStream, scratch: I, step: F, merge: M) -> A
where
    A: Default + Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut A, &mut StreamRng, &mut S) + Sync,
    M: Fn(A, A) -> A,
{
    let partials: Vec<A> = (0..block_count(n))
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.substream(b).generator();
            let mut s = scratch();
            let mut acc = A::default();
            for _ in 0..block_len(n, b) {
                step(&mut acc, &mut rng, &mut s);
            }
            acc
        })
        .collect();
    partials.into_iter().fold(A::default(), merge)
}

/// Number of replications for which `trial` returns `true`.
pub fn count_hits<S, I, F>(n: u64, stream: RngStream, scratch: I, trial: F) -> u64
where
    I: Fn() -> S + Sync,
    F: Fn(&mut StreamRng, &mut S) -> bool + Sync,
{
    fold_replications(
        n,
        stream,
        scratch,
        |acc: &mut u64, rng, s| *acc += u64::from(trial(rng, s)),
        |a, b| a + b,
    )
}

/// One sampled value per replication, in replication order.
pub fn sample_values<S, I, F>(n: u64, stream: RngStream, scratch: I, sample: F) -> Vec<f64>
where
    I: Fn() -> S + Sync,
    F: Fn(&mut StreamRng, &mut S) -> f64 + Sync,
{
    let blocks: Vec<Vec<f64>> = (0..block_count(n))
        .into_par_iter()
        .map(|b| {
            let mut rng = stream.substream(b).generator();
            let mut s = scratch();
            (0..block_len(n, b)).map(|_| sample(&mut rng, &mut s)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(n as usize);
    for block in blocks {
        out.extend(block);
    }
    out
}

/// Maps independent work items `0..n` in parallel; item `i` gets `stream.substream(i)`.
pub fn map_items<T, F>(n: u64, stream: RngStream, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, RngStream) -> T + Sync,
{
    (0..n).into_par_iter().map(|i| f(i, stream.substream(i))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(threads: usize) -> rayon::ThreadPool {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap()
    }

    #[test]
    fn independent_of_worker_count() {
        let stream = RngStream::new(99, 1);
        let run = || {
            let hits = count_hits(10_001, stream, || (), |rng, _| rng.uniform() < 0.3);
            let values = sample_values(5_000, stream, || (), |rng, _| rng.standard_normal());
            (hits, values)
        };
        let a = pool(1).install(run);
        let b = pool(4).install(run);
        assert_eq!(a.0, b.0);
        assert_eq!(a.1.len(), 5_000);
        assert!(a.1.iter().zip(&b.1).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn handles_partial_and_empty_blocks() {
        let stream = RngStream::root(3);
        assert_eq!(count_hits(0, stream, || (), |_, _| true), 0);
        assert_eq!(count_hits(BLOCK_LEN + 1, stream, || (), |_, _| true), BLOCK_LEN + 1);
        assert_eq!(sample_values(3, stream, || (), |_, _| 1.0).len(), 3);
    }
}
