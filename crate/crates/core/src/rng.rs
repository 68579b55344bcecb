//! Counter-based random streams.
//!
//! Every random quantity in the crate is drawn from a [`RngStream`], a
//! `(seed, stream_id)` pair backed by ChaCha8. ChaCha is a counter-mode
//! generator: the key comes from the seed, the 64-bit stream selector from
//! `stream_id`, and the block counter is the draw index, so draw `i` of a
//! stream is a pure function of `(seed, stream_id, i)`.
//!
//! Monte-Carlo loops never share a generator between work items. Work is
//! cut into fixed blocks, each block gets its own [`RngStream::substream`],
//! and results are therefore independent of how blocks are scheduled.

use rand_chacha::ChaCha8Rng;
use rand_core::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::special::standard_normal_quantile;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Identifier of an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Root stream of a seed.
    pub fn root(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    /// Deterministically derived child stream. Distinct indices give
    /// distinct stream ids (up to 64-bit hash collisions).
    pub fn substream(&self, index: u64) -> Self {
        let mixed = splitmix64(self.stream_id ^ splitmix64(index.wrapping_mul(GOLDEN) ^ 0xD1B5_4A32_D192_ED03));
        Self::new(self.seed, mixed)
    }

    /// A fresh generator positioned at draw index 0 of this stream.
    pub fn generator(&self) -> StreamRng {
        let mut key = [0u8; 32];
        let mut state = self.seed;
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(self.stream_id);
        StreamRng { inner }
    }
}

/// Sequential reader over one [`RngStream`].
#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw on the open interval (0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw by inversion of the uniform.
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        standard_normal_quantile(self.uniform())
    }

    pub fn fill_standard_normal(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.standard_normal();
        }
    }

    /// Uniform index in `0..n` (Lemire's multiply-shift, rejection-free bias below 2^-64·n).
    #[inline]
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_stream_same_draws() {
        let s = RngStream::new(7, 3);
        let a: Vec<u64> = (0..16).map({
            let mut g = s.generator();
            move |_| g.next_u64()
        }).collect();
        let mut g = s.generator();
        let b: Vec<u64> = (0..16).map(|_| g.next_u64()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_streams_differ() {
        let mut a = RngStream::new(7, 3).generator();
        let mut b = RngStream::new(7, 4).generator();
        let mut c = RngStream::new(8, 3).generator();
        let (x, y, z) = (a.next_u64(), b.next_u64(), c.next_u64());
        assert_ne!(x, y);
        assert_ne!(x, z);
    }

    #[test]
    fn substreams_are_distinct() {
        let root = RngStream::root(1);
        let mut ids: Vec<u64> = (0..10_000).map(|i| root.substream(i).stream_id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 10_000);
        assert_ne!(root.substream(5).substream(0), root.substream(0).substream(5));
    }

    #[test]
    fn uniform_is_open_interval() {
        let mut g = RngStream::root(11).generator();
        for _ in 0..100_000 {
            let u = g.uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }

    #[test]
    fn uniform_moments() {
        let mut g = RngStream::root(12).generator();
        let n = 200_000;
        let mean = (0..n).map(|_| g.uniform()).sum::<f64>() / n as f64;
        // se = sqrt(1/12 / n)
        assert!((mean - 0.5).abs() < 4.0 * (1.0f64 / 12.0 / n as f64).sqrt());
    }
}
