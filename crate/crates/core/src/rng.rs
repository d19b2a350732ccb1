//! Seeded, splittable random streams for reproducible Monte Carlo.
//!
//! Every sampling routine takes an explicit stream so that results are a pure
//! function of `(master seed, stream path)` and never depend on thread
//! scheduling. Substreams are derived by folding the path into a SplitMix64
//! state and seeding a ChaCha12 generator from it:
//!
//! 1. `state = splitmix64(master)`
//! 2. for each path element `p`: `state = splitmix64(state ^ p)`
//! 3. the ChaCha12 key is the next four SplitMix64 outputs (256 bits).
//!
//! Gaussian variates are drawn from the ChaCha12 stream with the ziggurat
//! method of `rand_distr::StandardNormal`.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 output function (Steele, Lea, Flood 2014).
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent substream from a master seed and a path of indices.
///
/// Typical paths: `&[realization, layer]` for ensemble layers,
/// `&[realization]` for whole-matrix sampling, `&[cell, observable]` in the
/// experiment harness.
pub fn substream(master: u64, path: &[u64]) -> ChaCha12Rng {
    let mut state = master;
    let _ = splitmix64(&mut state);
    for &p in path {
        state ^= p;
        let _ = splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}
