//! Named deterministic random streams.
//!
//! Every consumer of randomness (split generation, initialization, batch
//! order, augmentation, k-means seeding) draws from its own stream so that
//! changing how much one consumer draws never shifts another.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

pub const STREAM_SPLIT: &str = "split";
pub const STREAM_INIT: &str = "init";
pub const STREAM_BATCH: &str = "batch";
pub const STREAM_AUGMENT: &str = "augment";
pub const STREAM_KMEANS: &str = "kmeans";

/// A single-consumer random stream identified by `(seed, stream)`.
///
/// ChaCha is platform independent, so the same pair yields the same
/// sequence everywhere.
#[derive(Debug, Clone)]
pub struct RngService {
    seed: u64,
    stream: u64,
    rng: ChaCha12Rng,
}

/// FNV-1a over the label bytes.
fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl RngService {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    /// Independent stream for a purpose label.
    pub fn derive_stream(seed: u64, purpose: &str) -> Self {
        Self::new(seed, label_hash(purpose))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform index in `[0, n)`. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.gen_range(0..n)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// Draws an index with probability proportional to `weights`.
    /// Returns `None` when every weight is zero.
    pub fn weighted_index(&mut self, weights: &[f64]) -> Option<usize> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        let mut target = self.uniform() * total;
        let mut last_positive = None;
        for (i, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                last_positive = Some(i);
                if target < w {
                    return Some(i);
                }
                target -= w;
            }
        }
        last_positive
    }
}
