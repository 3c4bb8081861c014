//! Keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream addressed by
//! `(seed, replicate, study, purpose)`. The key is mixed into the 256-bit
//! ChaCha key and the stream id is the purpose, so streams for different
//! coordinates are independent and adding studies or replicates never shifts
//! the draws of existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Covariates,
    Support,
    Coefficients,
    Errors,
    Censoring,
    Folds,
    Split,
}

impl Purpose {
    fn id(self) -> u64 {
        match self {
            Purpose::Covariates => 1,
            Purpose::Support => 2,
            Purpose::Coefficients => 3,
            Purpose::Errors => 4,
            Purpose::Censoring => 5,
            Purpose::Folds => 6,
            Purpose::Split => 7,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for one (seed, replicate, study, purpose) coordinate.
pub fn stream(seed: u64, replicate: u64, study: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut state = seed;
    let mut key = [0u8; 32];
    let words = [
        splitmix64(&mut state),
        splitmix64(&mut state) ^ replicate.wrapping_mul(0xD1B5_4A32_D192_ED03),
        splitmix64(&mut state) ^ study.wrapping_mul(0xABC9_8388_FB8F_AC03),
        splitmix64(&mut state) ^ replicate.rotate_left(32) ^ study.rotate_left(17),
    ];
    for (chunk, w) in key.chunks_mut(8).zip(words) {
        let mut s = w;
        chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(purpose.id());
    rng
}
