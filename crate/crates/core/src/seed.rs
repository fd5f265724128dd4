//! Seed derivation and coordinate-keyed hashing.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a base seed and a stream tag.
pub fn derive(base: u64, stream: u64) -> u64 {
    mix64(base ^ mix64(stream.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

pub fn rng(base: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, stream))
}

/// Hashes integer coordinates to a uniform value in [0, 1).
pub fn hash_unit(seed: u64, a: i64, b: i64, c: u64) -> f64 {
    let h = mix64(seed ^ mix64(a as u64 ^ mix64(b as u64 ^ mix64(c))));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Approximately standard-normal value keyed by integer coordinates
/// (Irwin-Hall sum of four uniforms, rescaled).
pub fn hash_normal(seed: u64, a: i64, b: i64, c: u64) -> f64 {
    let s: f64 = (0..4).map(|k| hash_unit(seed, a, b, c * 4 + k)).sum();
    (s - 2.0) * (3.0f64).sqrt()
}
