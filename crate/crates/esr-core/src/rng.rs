//! Deterministic pseudo-random numbers.
//!
//! Every seeded choice in this crate (fold shuffles, weight initialization,
//! synthetic noise, epoch shuffles) draws from [`Lcg64`], a fixed 64-bit
//! linear congruential generator with Knuth's MMIX constants. The algorithm
//! is pinned here, rather than borrowed from a library, so that a given seed
//! reproduces the exact same streams on any platform and in any port of this
//! pipeline.

/// MMIX multiplier (Knuth).
const MUL: u64 = 6364136223846793005;
/// MMIX increment (Knuth).
const INC: u64 = 1442695040888963407;

/// 64-bit linear congruential generator: `state = state * MUL + INC`.
///
/// Floating-point draws use the top 53 bits of the state; the low bits of an
/// LCG are weak and never leave this module.
#[derive(Clone, Debug)]
pub struct Lcg64 {
    state: u64,
}

impl Lcg64 {
    /// One warm-up step decorrelates small seeds from their first output.
    pub fn new(seed: u64) -> Self {
        let mut rng = Self { state: seed };
        rng.next_u64();
        rng
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_mul(MUL).wrapping_add(INC);
        self.state
    }

    /// Uniform in `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)` via the multiply-shift reduction
    /// (Lemire); `n` must be nonzero.
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Standard normal deviate via Box-Muller. Draws exactly two uniforms
    /// per call; the sine branch is discarded to keep the stream layout
    /// trivial to reproduce.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.next_f64().max(f64::MIN_POSITIVE);
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Derives an independent substream seed from `(seed, stream)` with a
/// SplitMix64-style avalanche, so per-fold / per-epoch generators do not
/// overlap trivially.
pub fn mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}
