//! Counter-based random number generation.
//!
//! Every random quantity in the crate is a pure function of a 64-bit seed
//! and a 64-bit counter, so any draw can be produced in isolation and in
//! any order. This is what makes disorder tables, probe vectors and
//! experiment sweeps reproducible independent of iteration order and
//! thread count.
//!
//! Stream layout:
//!
//! * [`raw`] returns the SplitMix64 output at stream position `index`,
//!   i.e. `mix(seed + (index + 1) * GAMMA)`.
//! * [`standard_normal`] consumes raw draws `2t` and `2t + 1` and applies
//!   the Box-Muller transform, so Gaussian `t` never overlaps Gaussian
//!   `t'` for `t != t'`.
//! * [`derive`] splits off an independent substream; used to give each
//!   trace probe and each experiment its own seed.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 output at stream position `index` of the stream `seed`.
#[inline]
pub fn raw(seed: u64, index: u64) -> u64 {
    mix(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Uniform draw in `[0, 1)` from stream position `index`.
#[inline]
pub fn uniform(seed: u64, index: u64) -> f64 {
    // 53 high bits of the raw word.
    (raw(seed, index) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw `t`, via Box-Muller on raw positions `2t` and `2t+1`.
///
/// `u1` is shifted into `(0, 1]` so the logarithm is always finite.
#[inline]
pub fn standard_normal(seed: u64, t: u64) -> f64 {
    let u1 = ((raw(seed, 2 * t) >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (raw(seed, 2 * t + 1) >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Independent substream of `seed` labelled by `tag`.
#[inline]
pub fn derive(seed: u64, tag: u64) -> u64 {
    mix(seed ^ mix(tag.wrapping_mul(GOLDEN_GAMMA) ^ 0xD1B5_4A32_D192_ED03))
}

/// Fills `out` with Rademacher entries (+1/-1), 64 entries per raw draw.
pub fn fill_rademacher(seed: u64, out: &mut [f64]) {
    for (block, chunk) in out.chunks_mut(64).enumerate() {
        let bits = raw(seed, block as u64);
        for (j, x) in chunk.iter_mut().enumerate() {
            *x = if bits >> j & 1 == 1 { 1.0 } else { -1.0 };
        }
    }
}
