//! Deterministic random streams.
//!
//! Every episode draws from its own ChaCha stream, addressed by a derived
//! seed and a stream index, so episodes can be generated in any order or in
//! parallel and still reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream families. Each gets an independent seed derived from the master.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    TrainTrajectory = 1,
    TrainSensing = 2,
    EvalTrajectory = 3,
    EvalSensing = 4,
    Init = 5,
    Shuffle = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, purpose: Purpose) -> u64 {
    splitmix64(splitmix64(master) ^ (purpose as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Stream `index` of the family `purpose` under `master`.
pub fn stream(master: u64, purpose: Purpose, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(master, purpose));
    rng.set_stream(index);
    rng
}
