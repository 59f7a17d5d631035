//! Seed hierarchy.
//!
//! A master seed fans out into named domains (topology, shadowing, trials).
//! Each domain is a ChaCha8 key; individual consumers (an AP, a link, a
//! trial) get their own 64-bit ChaCha stream inside that key, so adding
//! APs or trials never shifts the numbers drawn for existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags.
pub mod domain {
    pub const TOPOLOGY: u64 = 0x746f_706f;
    pub const SHADOWING: u64 = 0x7368_6164;
    pub const TRIALS: u64 = 0x7472_6961;
}

/// SplitMix64 finalizer over `master ^ tag`.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent ChaCha8 streams under one derived key.
#[derive(Debug, Clone)]
pub struct Substreams {
    base: ChaCha8Rng,
}

impl Substreams {
    pub fn new(master: u64, tag: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(derive_seed(master, tag)),
        }
    }

    /// Fresh generator positioned at the start of stream `id`.
    pub fn stream(&self, id: u64) -> ChaCha8Rng {
        let mut rng = self.base.clone();
        rng.set_stream(id);
        rng.set_word_pos(0);
        rng
    }
}
