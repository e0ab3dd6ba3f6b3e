//! Counter-based random streams.
//!
//! A stream is identified by `(seed, stream_id)`; item `i` of a stream always
//! occupies the same fixed window of the ChaCha8 keystream, so any item can be
//! regenerated on its own and chunks can be produced in any order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Stream id for design points (angles and offsets).
pub const DESIGN_STREAM: u64 = 0;
/// Stream id for additive noise.
pub const NOISE_STREAM: u64 = 1;

/// 64-bit draws reserved per item. Every consumer reads exactly this many.
pub const DRAWS_PER_ITEM: u64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterStream {
    pub seed: u64,
    pub stream: u64,
}

impl CounterStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Generator positioned at the start of item `index`.
    pub fn at(&self, index: u64) -> ItemRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        // two 32-bit words per draw
        rng.set_word_pos(u128::from(index) * u128::from(DRAWS_PER_ITEM) * 2);
        ItemRng { rng }
    }

    /// Generates items `start..start + len` sequentially into a vector.
    pub fn generate<T>(&self, start: u64, len: usize, mut item: impl FnMut(&mut ItemRng) -> T) -> Vec<T> {
        let mut rng = self.at(start);
        (0..len).map(|_| item(&mut rng)).collect()
    }
}

/// Thin wrapper handing out the fixed pair of draws for one item.
pub struct ItemRng {
    rng: ChaCha8Rng,
}

impl ItemRng {
    /// Uniform on [0, 1) with 53 random bits.
    pub fn unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Both draws of the item as uniforms on [0, 1).
    pub fn pair(&mut self) -> (f64, f64) {
        let a = self.unit();
        let b = self.unit();
        (a, b)
    }

    /// Standard normal by Box-Muller (cosine branch only).
    pub fn normal(&mut self) -> f64 {
        let (u1, u2) = self.pair();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        r * (2.0 * PI * u2).cos()
    }
}

/// Mixes a master seed with a path of integers (SplitMix64 finalizer).
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut h = splitmix(master ^ 0x5851_f42d_4c95_7f2d);
    for &p in path {
        h = splitmix(h ^ splitmix(p.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
