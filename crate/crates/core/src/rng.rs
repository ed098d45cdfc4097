//! Portable counter-based random numbers.
//!
//! The generator is SplitMix64 evaluated in counter mode: the `i`-th draw
//! for key `k` is `mix(k + (i + 1) * 0x9E3779B97F4A7C15)` where `mix` is the
//! SplitMix64 finalizer (Steele, Lea, Flood 2014). Sequential draws are
//! identical to the reference SplitMix64 stream seeded with `k`. Normals use
//! the Box–Muller transform on pairs of draws, evaluated with `libm` so the
//! results do not depend on the platform's math library.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random stream identified by a 64-bit key and a position counter.
#[derive(Clone, Debug)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        CounterRng { key: seed, counter: 0 }
    }

    /// Independent stream for a sub-purpose, derived from this key.
    pub fn fork(&self, tag: u64) -> Self {
        CounterRng::new(mix64(self.key ^ mix64(tag.wrapping_add(GOLDEN_GAMMA))))
    }

    /// The `index`-th draw of stream `seed`, without advancing anything.
    pub fn draw_at(seed: u64, index: u64) -> u64 {
        mix64(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = Self::draw_at(self.key, self.counter);
        self.counter += 1;
        v
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn range_inclusive(&mut self, lo: i64, hi: i64) -> i64 {
        lo + self.below((hi - lo + 1) as usize) as i64
    }

    pub fn coin(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }

    /// Pair of independent standard normals.
    pub fn normal_pair(&mut self) -> (f64, f64) {
        // 1 - u lies in (0, 1], keeping the logarithm finite
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        (r * libm::cos(theta), r * libm::sin(theta))
    }
}

/// Deterministic normal samples: same `(shape, seed, stddev)` gives a
/// bitwise-identical tensor on every run and platform.
pub fn seeded_normal<T: Scalar>(shape: &[usize], seed: u64, stddev: f64) -> Result<Tensor<T>> {
    if !(stddev >= 0.0) {
        return Err(Error::contract("stddev must be non-negative"));
    }
    let mut rng = CounterRng::new(seed);
    let mut pending: Option<f64> = None;
    Ok(Tensor::from_fn(shape, |_| {
        let z = match pending.take() {
            Some(z) => z,
            None => {
                let (a, b) = rng.normal_pair();
                pending = Some(b);
                a
            }
        };
        T::from_f64(z * stddev)
    }))
}

/// Deterministic uniform samples in `[lo, hi)`.
pub fn seeded_uniform<T: Scalar>(shape: &[usize], seed: u64, lo: f64, hi: f64) -> Tensor<T> {
    let mut rng = CounterRng::new(seed);
    Tensor::from_fn(shape, |_| T::from_f64(lo + (hi - lo) * rng.next_f64()))
}
