//! Random stream derivation. Every random draw in a filter run comes from a
//! stream keyed by `(seed, k, t, phase, particle)`, so results do not depend
//! on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const PHASE_INIT: u64 = 1;
pub(crate) const PHASE_PROPAGATE: u64 = 2;
pub(crate) const PHASE_RESAMPLE: u64 = 3;
pub(crate) const PHASE_PARAMS: u64 = 4;

#[inline]
fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn key(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6a09_e667_f3bc_c908, |acc, &p| splitmix(acc ^ splitmix(p)))
}

pub(crate) fn stream(seed: u64, k: usize, t: usize, phase: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(key(&[seed, k as u64, t as u64, phase, index as u64]))
}
