//! Deterministic per-path random streams.
//!
//! Every stream is keyed by `(master_seed, path_index, purpose)` and seeded
//! independently, so paths can be generated in any order or in parallel and
//! still reproduce bit for bit. The key is mixed with two rounds of the
//! SplitMix64 finalizer; the 256-bit ChaCha8 seed is then taken from four
//! successive SplitMix64 outputs of the mixed key.
//!
//! Standard normal variates come from `rand_distr::StandardNormal` (the
//! ziggurat method of rand_distr 0.5.1, pinned in the manifest).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// What a stream is used for. Distinct purposes of the same path never
/// share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Increments = 0,
    InitialState = 1,
    Windows = 2,
}

pub fn stream(master_seed: u64, path_index: u64, purpose: Purpose) -> ChaCha8Rng {
    let key = mix64(mix64(master_seed ^ GOLDEN_GAMMA) ^ path_index.wrapping_mul(GOLDEN_GAMMA))
        ^ (purpose as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut state = mix64(key);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        state = state.wrapping_add(GOLDEN_GAMMA);
        chunk.copy_from_slice(&mix64(state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

pub fn standard_normals(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect()
}
