//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator keyed by `seed` with a separate stream
//! id, so replication `r` of an experiment reads stream `(seed, r)` regardless
//! of which worker runs it.

use rand_chacha::rand_core::{RngCore, SeedableRng};
pub use rand_chacha::ChaCha8Rng;

/// Name recorded in output headers.
pub const ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), seed_from_u64 + set_stream";

/// Stream `stream` of generator `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer, used to derive independent seeds from a seed and a tag.
pub fn mix(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform draw on `[0, 1)` with 53 random bits.
#[inline]
pub fn uniform<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Bernoulli draw.
#[inline]
pub fn bernoulli<R: RngCore>(rng: &mut R, p: f64) -> bool {
    uniform(rng) < p
}

/// Uniform index in `0..n` by rejection-free multiply-shift.
#[inline]
pub fn below<R: RngCore>(rng: &mut R, n: usize) -> usize {
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}

/// A fair sign.
#[inline]
pub fn sign<R: RngCore>(rng: &mut R) -> f64 {
    if rng.next_u64() >> 63 == 0 {
        1.0
    } else {
        -1.0
    }
}
