//! Deterministic seed derivation. Every random stream in the pipeline is a
//! ChaCha8 generator keyed by the root seed XOR a hash of its role.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// `root ^ fnv1a(tag_0 0xff tag_1 0xff ... index_le)`.
pub fn derive_seed(root: u64, tags: &[&str], index: u64) -> u64 {
    let mut buf = Vec::new();
    for t in tags {
        buf.extend_from_slice(t.as_bytes());
        buf.push(0xff);
    }
    buf.extend_from_slice(&index.to_le_bytes());
    root ^ fnv1a(&buf)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
