//! Deterministic, splittable RNG streams.
//!
//! Every stochastic decision in a run draws from a stream derived from the
//! master seed plus a fixed tag path, e.g. `(seed, generation, child_index)`.
//! Streams are therefore independent of evaluation order and of which node
//! performs the work, which is what makes the distributed topologies
//! bit-identical to the serial baseline.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// Stream tags. Keeps the tag space readable at call sites.
pub mod stream {
    pub const INIT_POPULATION: u64 = 1;
    pub const CHILD_PARENTS: u64 = 2;
    pub const CHILD_OPS: u64 = 3;
    pub const EPISODE: u64 = 4;
    pub const SYNTHETIC_TARGET: u64 = 5;
}

/// Derives a 256-bit ChaCha key from the master seed and a tag path using
/// splitmix64 absorption. Collision-free enough for tag paths of run-scale
/// cardinality and stable across platforms.
pub fn derive_rng(master_seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut state = splitmix64(master_seed ^ 0x9e37_79b9_7f4a_7c15);
    for &t in tags {
        state = splitmix64(state ^ splitmix64(t.wrapping_add(0x2545_f491_4f6c_dd1d)));
    }
    let mut key = [0u8; 32];
    let mut s = state;
    for chunk in key.chunks_exact_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
