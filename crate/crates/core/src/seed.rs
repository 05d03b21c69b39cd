//! Splittable seed derivation.
//!
//! Every random decision in the simulator draws from a `ChaCha8Rng`
//! seeded by mixing the experiment's master seed with positional
//! context (client id, round index, a stream tag). Derivation is
//! positional, not order-of-execution dependent, so serial and
//! parallel client execution produce bit-identical results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep independent uses of the same (seed, client, round)
/// triple from colliding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    LocalTrain,
    ClientNoise,
    TopupNoise,
    Participation,
    Poison,
    Defense,
}

impl Stream {
    fn tag(self) -> u64 {
        match self {
            Stream::LocalTrain => 0x01,
            Stream::ClientNoise => 0x02,
            Stream::TopupNoise => 0x03,
            Stream::Participation => 0x04,
            Stream::Poison => 0x05,
            Stream::Defense => 0x06,
        }
    }
}

/// SplitMix64 finalizer; a single mixing round per input word.
fn splitmix(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a sequence of words into one 64-bit seed.
pub fn mix(parts: &[u64]) -> u64 {
    let mut acc = 0x243f_6a88_85a3_08d3u64; // pi fractional bits
    for &p in parts {
        acc = splitmix(acc ^ p);
    }
    acc
}

/// seed(master, client, round, stream) — the per-client per-round scheme.
pub fn derive(master: u64, client_id: u64, round: u64, stream: Stream) -> u64 {
    mix(&[master, client_id, round, stream.tag()])
}

/// Deterministic generator for a derived seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
