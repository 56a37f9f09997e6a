//! Deterministic random streams.
//!
//! Every random quantity in an experiment flows from one top-level `u64` seed
//! through named substreams ("graph", "rates", "init", ...), so a config plus
//! seed pins the entire run byte for byte. Substream derivation uses FNV-1a
//! over the label followed by a splitmix64 finalizer; both are fixed
//! algorithms, so derived seeds never change across platforms or releases.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the seed of a named substream from a master seed.
#[must_use]
pub fn substream_seed(master: u64, label: &str) -> u64 {
    splitmix64(master ^ fnv1a(label.as_bytes()))
}

/// Derives a per-index seed (one RNG per round, per agent, ...) within a
/// substream. Mixing the index through splitmix64 keeps neighboring indices
/// statistically unrelated.
#[must_use]
pub fn indexed_seed(stream: u64, index: u64) -> u64 {
    splitmix64(stream ^ splitmix64(index.wrapping_add(0x51ed_270b)))
}

/// The crate-wide RNG: small-state ChaCha, fixed stream algorithm.
#[must_use]
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
