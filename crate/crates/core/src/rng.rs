//! Counter-keyed random streams.
//!
//! Every random quantity in the crate is addressed by a [`StreamKey`]: a master
//! seed, a domain tag, and up to four integer coordinates. The key is packed
//! injectively into a ChaCha8 key (256 bits) plus stream id (64 bits), so
//! distinct coordinates never share a generator and identical coordinates always
//! reproduce the identical sequence, regardless of evaluation order or thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Purpose of a stream. Keeps, e.g., index selection and perturbations at the
/// same `(replica, t)` independent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u32)]
pub enum Domain {
    Perturb = 1,
    Select = 2,
    Data = 3,
    Replacement = 4,
    Probe = 5,
    MonteCarlo = 6,
    TestSet = 7,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub domain: Domain,
    pub replica: u64,
    pub t: u64,
    pub slot: u32,
    pub direction: u64,
}

impl StreamKey {
    pub fn new(seed: u64, domain: Domain) -> Self {
        Self {
            seed,
            domain,
            replica: 0,
            t: 0,
            slot: 0,
            direction: 0,
        }
    }

    pub fn replica(mut self, replica: u64) -> Self {
        self.replica = replica;
        self
    }

    pub fn step(mut self, t: u64) -> Self {
        self.t = t;
        self
    }

    pub fn slot(mut self, slot: u32) -> Self {
        self.slot = slot;
        self
    }

    pub fn direction(mut self, direction: u64) -> Self {
        self.direction = direction;
        self
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.replica.to_le_bytes());
        key[16..24].copy_from_slice(&self.t.to_le_bytes());
        key[24..28].copy_from_slice(&(self.domain as u32).to_le_bytes());
        key[28..32].copy_from_slice(&self.slot.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.direction);
        rng
    }
}

/// Derives a child seed from a parent seed and a label, for building
/// independent datasets per replica.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ label.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
