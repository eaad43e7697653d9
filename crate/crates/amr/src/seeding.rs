//! Deterministic seed splitting.
//!
//! Every randomized subsystem derives its generator from the root seed and a
//! stable string label, so independent streams stay independent of thread
//! scheduling and call order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// FNV-1a over the label bytes, mixed with the root seed.
fn label_hash(seed: u64, label: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET ^ seed;
    for &b in label.as_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(PRIME);
    }
    // splitmix64 finalizer to decorrelate nearby labels
    h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// A ChaCha stream keyed by `(seed, label)`.
pub fn rng_for(seed: u64, label: &str) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(label_hash(seed, label))
}
