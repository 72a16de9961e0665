//! Seeded, splittable randomness.
//!
//! A single master seed fans out into independent deterministic streams,
//! one per (task, purpose) pair, so that e.g. the examples drawn for task 3
//! do not shift when task 2 asks for one more random number.

use rand_chacha::ChaCha12Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

/// What a derived stream is used for. Each purpose gets statistically
/// independent bytes for the same (master seed, task).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Drawing labeled examples for a task.
    Data,
    /// Drawing concepts and their supports.
    Concept,
    /// Choosing the shared feature set V.
    SharedSupport,
    /// Train/test splitting.
    Split,
    /// Fresh samples for holdout evaluation.
    Holdout,
    /// Side-information draws (p, q, b).
    SideInfo,
    /// Secret-sharing randomness vectors.
    ShareRandomness,
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::Data => 0x01,
            Purpose::Concept => 0x02,
            Purpose::SharedSupport => 0x03,
            Purpose::Split => 0x04,
            Purpose::Holdout => 0x05,
            Purpose::SideInfo => 0x06,
            Purpose::ShareRandomness => 0x07,
        }
    }
}

/// Master seed for an experiment. Streams are derived per (task, purpose).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master: u64,
}

impl SeedSpec {
    pub fn new(master: u64) -> Self {
        SeedSpec { master }
    }

    /// Deterministic stream for (task, purpose). Task indices are 0-based;
    /// use 0 for global (non-per-task) draws.
    pub fn stream(&self, task: usize, purpose: Purpose) -> ChaCha12Rng {
        let h0 = splitmix(self.master ^ 0xa076_1d64_78bd_642f);
        let h1 = splitmix(h0 ^ (task as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let h2 = splitmix(h1 ^ purpose.code().wrapping_mul(0xe703_7ed1_a0b4_28db));
        let mut seed = [0u8; 32];
        for (i, chunk) in seed.chunks_exact_mut(8).enumerate() {
            chunk.copy_from_slice(&splitmix(h2 ^ (i as u64 + 1)).to_le_bytes());
        }
        ChaCha12Rng::from_seed(seed)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform f64 in [0, 1) with 53 bits of precision.
pub fn unit_f64(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform usize in [0, n). Panics if n == 0.
pub fn below(rng: &mut impl RngCore, n: usize) -> usize {
    assert!(n > 0, "below() requires n > 0");
    let n = n as u64;
    let zone = u64::MAX - u64::MAX % n;
    loop {
        let v = rng.next_u64();
        if v < zone {
            return (v % n) as usize;
        }
    }
}

/// True with probability p.
pub fn coin(rng: &mut impl RngCore, p: f64) -> bool {
    unit_f64(rng) < p
}

/// A single uniform sign in {-1, +1}.
pub fn sign(rng: &mut impl RngCore) -> i8 {
    if rng.next_u64() & 1 == 1 {
        1
    } else {
        -1
    }
}

/// Fill a buffer with uniform signs, consuming one u64 per 64 entries.
pub fn fill_signs(rng: &mut impl RngCore, buf: &mut [i8]) {
    for chunk in buf.chunks_mut(64) {
        let mut word = rng.next_u64();
        for v in chunk.iter_mut() {
            *v = if word & 1 == 1 { 1 } else { -1 };
            word >>= 1;
        }
    }
}

/// In-place Fisher-Yates shuffle.
pub fn shuffle<T>(rng: &mut impl RngCore, slice: &mut [T]) {
    for i in (1..slice.len()).rev() {
        let j = below(rng, i + 1);
        slice.swap(i, j);
    }
}

/// A sorted uniform random k-subset of {0, ..., d-1}.
pub fn subset(rng: &mut impl RngCore, d: usize, k: usize) -> Vec<usize> {
    assert!(k <= d, "subset size {k} exceeds universe {d}");
    let mut pool: Vec<usize> = (0..d).collect();
    for i in 0..k {
        let j = i + below(rng, d - i);
        pool.swap(i, j);
    }
    let mut chosen: Vec<usize> = pool[..k].to_vec();
    chosen.sort_unstable();
    chosen
}
