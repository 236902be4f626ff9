//! Counter-based random numbers.
//!
//! Every draw is a pure function of `(seed, stream, a, b)` (and optionally a
//! lane index), so draws do not depend on evaluation order and parallel
//! execution reproduces sequential runs bit for bit. The mixer is the
//! SplitMix64 finalizer.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline(always)]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Named draw streams so different uses of one seed never collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Feedback = 2,
    Data = 3,
    Background = 4,
    Blankout = 5,
    Shuffle = 6,
    Probe = 7,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub const fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub const fn seed(&self) -> u64 {
        self.seed
    }

    /// Base key for a family of lane draws.
    #[inline(always)]
    pub fn key(&self, stream: Stream, a: u64, b: u64) -> u64 {
        let k = mix64(self.seed ^ (stream as u64).wrapping_mul(GOLDEN));
        let k = mix64(k ^ a.wrapping_mul(0xD6E8_FEB8_6659_FD93));
        mix64(k ^ b.wrapping_mul(0xA076_1D64_78BD_642F))
    }

    #[inline(always)]
    pub fn draw(&self, stream: Stream, a: u64, b: u64) -> u64 {
        self.key(stream, a, b)
    }

    /// `lane`-th draw under a base key; one mix per draw.
    #[inline(always)]
    pub fn lane(key: u64, lane: u64) -> u64 {
        mix64(key.wrapping_add((lane + 1).wrapping_mul(GOLDEN)))
    }

    #[inline(always)]
    pub fn uniform(&self, stream: Stream, a: u64, b: u64) -> f64 {
        to_unit(self.draw(stream, a, b))
    }

    /// Uniform in `[-bound, bound)`.
    pub fn symmetric(&self, stream: Stream, a: u64, b: u64, bound: f64) -> f64 {
        (2.0 * self.uniform(stream, a, b) - 1.0) * bound
    }
}

/// Top 53 bits as a float in `[0, 1)`.
#[inline(always)]
pub fn to_unit(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Integer acceptance threshold for a Bernoulli draw `x < threshold`.
/// `None` means "always".
pub fn bernoulli_threshold(p: f64) -> Option<u64> {
    if p >= 1.0 {
        None
    } else if p <= 0.0 {
        Some(0)
    } else {
        Some((p * 18_446_744_073_709_551_616.0) as u64)
    }
}

/// Uniform index in `0..n` by multiply-high.
#[inline(always)]
pub fn below(x: u64, n: u64) -> u64 {
    ((x as u128 * n as u128) >> 64) as u64
}

/// Number of failed Bernoulli(`q`) trials before the first success.
///
/// Uses the portable `libm` logarithms so the result is identical on every
/// platform.
pub fn geometric(x: u64, q: f64) -> u64 {
    if q >= 1.0 {
        return 0;
    }
    if q <= 0.0 {
        return u64::MAX;
    }
    // u in (0, 1]
    let u = 1.0 - to_unit(x);
    let k = (libm::log(u) / libm::log1p(-q)).floor();
    if k >= u64::MAX as f64 {
        u64::MAX
    } else {
        k as u64
    }
}

/// Deterministic Fisher-Yates permutation of `0..n`.
pub fn permutation(rng: &CounterRng, n: usize, tag: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    let key = rng.key(Stream::Shuffle, tag, n as u64);
    for i in (1..n).rev() {
        let j = below(CounterRng::lane(key, i as u64), i as u64 + 1) as usize;
        idx.swap(i, j);
    }
    idx
}
