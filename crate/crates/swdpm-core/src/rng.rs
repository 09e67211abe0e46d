//! Seeded random streams.
//!
//! Every source of randomness in a run is a ChaCha8 stream derived from the
//! experiment seed and a stable label, so independent concerns (intention
//! sampling, matchmaking shuffles, behavior policies, tie-breaks) never share
//! state and any single stream can be reproduced in isolation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8], mut hash: u64) -> u64 {
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives the stream seed for `labels` under the experiment `seed`.
pub fn stream_seed(seed: u64, labels: &[&str]) -> u64 {
    let mut h = FNV_OFFSET;
    for label in labels {
        h = fnv1a(label.as_bytes(), h);
        h = fnv1a(&[0x1f], h);
    }
    splitmix64(seed ^ splitmix64(h))
}

/// A named independent random stream for the given experiment seed.
pub fn stream(seed: u64, labels: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(stream_seed(seed, labels))
}
