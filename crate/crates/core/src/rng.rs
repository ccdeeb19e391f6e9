//! Named random streams.
//!
//! Every stochastic stage draws from its own ChaCha stream keyed by the master
//! seed, a stage name, and an optional index, so stages can be replayed in
//! isolation and parallel scheduling never changes the draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const RFF: &str = "rff";
pub const KNOCKOFF: &str = "knockoff";
pub const CV: &str = "cv";
pub const SUBSAMPLE: &str = "subsample";
pub const SIM: &str = "sim";

fn fnv1a(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn stream(seed: u64, name: &str) -> ChaCha8Rng {
    substream(seed, name, 0)
}

pub fn substream(seed: u64, name: &str, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a(name).to_le_bytes());
    key[16..24].copy_from_slice(&index.to_le_bytes());
    key[24..].copy_from_slice(b"spofe\0\0\0");
    ChaCha8Rng::from_seed(key)
}
