//! Seeded random streams.
//!
//! Every random draw in the engine comes from a [`SimRng`] (ChaCha8) built by
//! [`stream`] from a master seed and a path of integers. Paths used by the
//! experiment harness are `[realization, round, purpose]` with purposes
//! listed in [`Purpose`], so the instance drawn at a given round does not
//! depend on which arm was played or how many draws a policy consumed.
//!
//! Inside one instance draw, patients are generated in index order and each
//! patient consumes exactly two uniforms: first the feature, then the hidden
//! context.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Instance = 0,
    Human = 1,
    Outcomes = 2,
    BaselineHuman = 3,
    Replay = 4,
    Completion = 5,
    BaselineCompletion = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a path of integers into a 64-bit seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn stream(master: u64, path: &[u64]) -> SimRng {
    seeded(derive_seed(master, path))
}
