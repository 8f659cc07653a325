use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

/// Seeded uniform sampler used to draw initial frequency estimates.
///
/// SplitMix64 seeded directly with the 64-bit scenario seed; each draw takes the top 53
/// bits of one output as `u in [0, 1)` and returns `lo + (hi - lo) u`. Draws are consumed
/// follower by follower, component by component.
pub struct UniformSampler {
    inner: SplitMix64,
}

impl UniformSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: SplitMix64::seed_from_u64(seed),
        }
    }

    pub fn unit(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }
}
