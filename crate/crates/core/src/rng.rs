//! Deterministic per-path random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed and
//! positioned on stream `4 * path + lane`, so the draws of a path depend only
//! on `(master seed, path index, lane)` and never on which worker runs it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Number of independent lanes available to one path.
pub const LANES: u64 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, path: u64, lane: u64) -> Self {
        assert!(lane < LANES, "lane {lane} out of range");
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(path.wrapping_mul(LANES).wrapping_add(lane));
        Self { inner }
    }

    /// Uniform draw on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Exponential waiting time with the given positive rate.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -(1.0 - self.uniform()).ln() / rate
    }
}
