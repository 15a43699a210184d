//! Named random substreams.
//!
//! All randomness derives from one root seed. Each consumer asks for its own
//! stream keyed by a [`Stream`] tag and up to two indices, so a component can
//! be reproduced in isolation and clients can run in any order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Data = 1,
    Split = 2,
    Init = 3,
    Batches = 4,
    Augment = 5,
    Instance = 6,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic 64-bit key for `(root, tag, a, b)`.
pub fn derive_seed(root: u64, tag: Stream, a: u64, b: u64) -> u64 {
    let mut h = splitmix(root);
    h = splitmix(h ^ tag as u64);
    h = splitmix(h ^ a);
    splitmix(h ^ b.rotate_left(17))
}

pub fn stream(root: u64, tag: Stream, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, tag, a, b))
}
