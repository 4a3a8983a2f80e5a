//! Deterministic stream derivation.
//!
//! Every random draw in the simulator comes from a ChaCha stream derived from
//! an experiment seed plus a list of integer tags (tti, rru id, purpose).
//! Derivation is a SplitMix64 hash chain, so results do not depend on thread
//! count, platform, or hash-map iteration order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with tags into a single derived seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut state = base ^ 0x6c62_272e_07bb_0142;
    let mut out = splitmix64(&mut state);
    for &t in tags {
        state ^= t.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        out ^= splitmix64(&mut state);
    }
    out
}

/// A ChaCha8 stream for the given (base, tags) identity.
pub fn derive_rng(base: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tags))
}
