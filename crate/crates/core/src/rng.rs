//! Counter-based random substreams.
//!
//! Every Monte Carlo path draws from its own ChaCha stream selected by
//! `(master seed, purpose, node, path)`. The key is derived from the seed and
//! the purpose, the 64-bit stream id from `node << 32 | path`, so results do
//! not depend on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for; keeps e.g. Feynman-Kac and closed-loop noise independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    FeynmanKac = 1,
    ClosedLoop = 2,
    Sampling = 3,
    Eigen = 4,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn key(seed: u64, purpose: Purpose) -> [u8; 32] {
    let mut state = seed ^ (purpose as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93);
    let mut out = [0u8; 32];
    for chunk in out.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    out
}

/// Independent generator for `(seed, purpose, node, path)`.
pub fn substream(seed: u64, purpose: Purpose, node: u32, path: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key(seed, purpose));
    rng.set_stream(((node as u64) << 32) | path as u64);
    rng
}
