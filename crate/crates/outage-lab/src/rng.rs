//! Counter-based random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream keyed by
//! `(seed, domain)` and selected by a 64-bit stream index. A stream is a pure
//! function of those three integers, so work can be split across threads in
//! any order without changing a single draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Channel realizations inside an outage experiment.
pub const DOMAIN_CHANNEL: u64 = 0x4348_414e;
/// Noise draws of the AWGN mutual-information estimator.
pub const DOMAIN_MI_NOISE: u64 = 0x4d49_4e5a;
/// Pilot runs used to calibrate power policies.
pub const DOMAIN_PILOT: u64 = 0x5049_4c54;
/// Power audits.
pub const DOMAIN_AUDIT: u64 = 0x4155_4454;
/// Per-sample noise draws of the rotated group mutual information.
pub const DOMAIN_GROUP_MI: u64 = 0x4752_4d49;

/// Samples per stream when a long run is split into chunks. Chunk `k` of a run
/// always uses stream `k`, so results do not depend on how chunks are scheduled.
pub const CHUNK_SIZE: u64 = 4096;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes an extra word into a domain tag, e.g. the index of an SNR point.
pub fn subdomain(domain: u64, index: u64) -> u64 {
    let mut state = domain ^ index.rotate_left(32);
    splitmix64(&mut state) ^ index
}

/// Returns the generator for `(seed, domain, stream)`.
pub fn stream_rng(seed: u64, domain: u64, stream: u64) -> ChaCha8Rng {
    let mut state = seed ^ domain.wrapping_mul(0xd6e8_feb8_6659_fd93);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}
