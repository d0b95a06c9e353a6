//! Counter-based random streams.
//!
//! The `n`-th draw of an entity is a pure function of `(seed, replication,
//! entity label, n)`: a ChaCha8 keystream keyed by the seed and replication,
//! with the stream id derived from the label and the position from `n`.
//! Draws never depend on the order in which entities are sampled.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 64-bit FNV-1a hash.
pub fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomStreams {
    seed: u64,
    replication: u64,
}

impl RandomStreams {
    pub fn new(seed: u64) -> Self {
        RandomStreams {
            seed,
            replication: 0,
        }
    }

    pub fn with_replication(self, replication: u64) -> Self {
        RandomStreams {
            replication,
            ..self
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn replication(&self) -> u64 {
        self.replication
    }

    fn rng(&self, label: &str, n: u64) -> ChaCha8Rng {
        assert!(n >= 1, "draw indices start at 1");
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.replication.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(fnv1a(label));
        rng.set_word_pos(2 * u128::from(n - 1));
        rng
    }

    /// The `n`-th raw 64-bit value of `label` (`n` starts at 1).
    pub fn u64(&self, label: &str, n: u64) -> u64 {
        self.rng(label, n).next_u64()
    }

    /// The `n`-th uniform draw of `label`, in `[0, 1)` with 53-bit precision.
    pub fn uniform(&self, label: &str, n: u64) -> f64 {
        (self.u64(label, n) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}
