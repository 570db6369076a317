//! Deterministic, splittable random number generation.
//!
//! Every random draw in the crate goes through a [`SeededRng`] keyed by a
//! `(seed, stream)` pair. Child generators are derived with [`SeededRng::split`]
//! from the key alone, so the sequence a child produces does not depend on how
//! much the parent has already consumed or on which thread runs it.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha12Rng,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Derives an independent child generator. Depends only on `(seed, stream, key)`.
    pub fn split(&self, key: u64) -> SeededRng {
        let stream = splitmix64(self.stream ^ splitmix64(key.wrapping_add(0x5851_f42d_4c95_7f2d)));
        SeededRng::new(self.seed, stream)
    }

    /// A fresh 64-bit seed drawn from this generator.
    pub fn next_seed(mut self) -> u64 {
        self.next_u64()
    }

    pub fn normal(&mut self) -> f64 {
        self.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.random::<f64>()
    }

    pub fn index(&mut self, n: usize) -> usize {
        self.random_range(0..n)
    }

    pub fn fill_normal(&mut self, out: &mut [f64], std: f64) {
        for x in out.iter_mut() {
            *x = std * self.normal();
        }
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
