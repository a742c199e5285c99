//! Gaussian energy landscapes on the Hamming cube: strict and full-tensor
//! p-spin interactions and the REM limit.
//!
//! A realization stores the full table `U: Q_N -> R`. For the p-spin
//! variants the table is produced by seeding one scaled coupling per
//! support set at the table index whose bit word is the subset indicator
//! and applying a fast Walsh-Hadamard transform; character orthogonality
//! of the parity functions turns that into `Σ_J g_J Π_{j in J} σ_j` in
//! `O(N 2^N)` regardless of p.
//!
//! Determinism: coupling (or configuration) with bit word `w` consumes
//! Gaussian draw `w` of the realization's seed stream (raw positions
//! `2w`, `2w+1`; see [`crate::rng`]). Regenerating with the same
//! `(variant, n, seed)` reproduces the table bit for bit on any thread
//! count.

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::hypercube::{binomial, SpinConfiguration};
use crate::rng;
use crate::{Error, Result};

/// Largest spin count for materialized energy tables (`2^26` doubles,
/// half a GiB).
pub const MAX_TABLE_N: usize = 26;

/// Which Gaussian process generates the landscape.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum DisorderVariant {
    /// Couplings on strictly increasing index tuples, scale `sqrt(p!/N^{p-1})`.
    StrictPSpin { p: usize },
    /// Couplings on all index tuples, scale `N^{(1-p)/2}`; covariance is
    /// exactly `N r^p`.
    FullPSpin { p: usize },
    /// Independent energies `sqrt(N) g(σ)` (the p -> infinity landscape).
    Rem,
}

impl DisorderVariant {
    pub fn p(&self) -> Option<usize> {
        match *self {
            DisorderVariant::StrictPSpin { p } | DisorderVariant::FullPSpin { p } => Some(p),
            DisorderVariant::Rem => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            DisorderVariant::StrictPSpin { .. } => "strict",
            DisorderVariant::FullPSpin { .. } => "full",
            DisorderVariant::Rem => "rem",
        }
    }

    fn tag(&self) -> u8 {
        match self {
            DisorderVariant::StrictPSpin { .. } => 0,
            DisorderVariant::FullPSpin { .. } => 1,
            DisorderVariant::Rem => 2,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match *self {
            DisorderVariant::StrictPSpin { p } => {
                if p < 2 || p > n {
                    return Err(Error::InvalidInteractionOrder { p, n });
                }
            }
            DisorderVariant::FullPSpin { p } => {
                if p < 2 {
                    return Err(Error::InvalidInteractionOrder { p, n });
                }
            }
            DisorderVariant::Rem => {}
        }
        Ok(())
    }
}

/// A full energy table `U(σ)` for every configuration, plus generation
/// metadata.
#[derive(Clone, Debug)]
pub struct DisorderRealization {
    energies: Vec<f64>,
    variant: DisorderVariant,
    n: usize,
    seed: u64,
}

impl DisorderRealization {
    /// Samples a realization of the prescribed Gaussian process.
    pub fn sample(variant: DisorderVariant, n: usize, seed: u64) -> Result<Self> {
        if n < 2 || n > MAX_TABLE_N {
            return Err(Error::SpinCountTooLarge {
                n,
                cap: MAX_TABLE_N,
            });
        }
        variant.validate(n)?;
        let dim = 1usize << n;
        let mut table = vec![0.0f64; dim];
        match variant {
            DisorderVariant::Rem => {
                let scale = (n as f64).sqrt();
                table
                    .par_iter_mut()
                    .enumerate()
                    .for_each(|(w, slot)| *slot = scale * rng::standard_normal(seed, w as u64));
            }
            DisorderVariant::StrictPSpin { p } => {
                // (-1)^p twist: bit j = 1 encodes σ_j = +1, so each parity
                // function picks up (-1)^{|J|} relative to the transform
                // character (see seeded_sign).
                let sign = seeded_sign(p);
                let scale = strict_scale(n, p);
                table.par_iter_mut().enumerate().for_each(|(w, slot)| {
                    if (w as u32).count_ones() as usize == p {
                        *slot = sign * scale * rng::standard_normal(seed, w as u64);
                    }
                });
                walsh_hadamard_inplace(&mut table);
            }
            DisorderVariant::FullPSpin { p } => {
                let sign = seeded_sign(p);
                let stds = full_support_stds(n, p);
                table.par_iter_mut().enumerate().for_each(|(w, slot)| {
                    let k = (w as u32).count_ones() as usize;
                    if stds[k] > 0.0 {
                        *slot = sign * stds[k] * rng::standard_normal(seed, w as u64);
                    }
                });
                walsh_hadamard_inplace(&mut table);
            }
        }
        Ok(Self {
            energies: table,
            variant,
            n,
            seed,
        })
    }

    /// Strict-variant test hook: couplings supplied per subset word
    /// instead of drawn. The `sqrt(p!/N^{p-1})` scale is still applied.
    pub fn sample_strict_with_couplings(
        n: usize,
        p: usize,
        coupling: impl Fn(u32) -> f64,
    ) -> Result<Self> {
        let variant = DisorderVariant::StrictPSpin { p };
        if n < 2 || n > MAX_TABLE_N {
            return Err(Error::SpinCountTooLarge {
                n,
                cap: MAX_TABLE_N,
            });
        }
        variant.validate(n)?;
        let sign = seeded_sign(p);
        let scale = strict_scale(n, p);
        let mut table = vec![0.0f64; 1 << n];
        for (w, slot) in table.iter_mut().enumerate() {
            if (w as u32).count_ones() as usize == p {
                *slot = sign * scale * coupling(w as u32);
            }
        }
        walsh_hadamard_inplace(&mut table);
        Ok(Self {
            energies: table,
            variant,
            n,
            seed: 0,
        })
    }

    /// Full-variant test hook: every raw tuple coupling forced to the
    /// constant `c`. The effective coupling on a support of size k is
    /// `c` times the number of p-tuples with that odd-multiplicity set.
    pub fn sample_full_with_constant_couplings(n: usize, p: usize, c: f64) -> Result<Self> {
        let variant = DisorderVariant::FullPSpin { p };
        if n < 2 || n > MAX_TABLE_N {
            return Err(Error::SpinCountTooLarge {
                n,
                cap: MAX_TABLE_N,
            });
        }
        variant.validate(n)?;
        if (n as f64).powi(p as i32) > 1e15 {
            return Err(Error::InvalidParameter(
                "constant-coupling hook needs n^p within exact f64 range".into(),
            ));
        }
        let sign = seeded_sign(p);
        let norm = (n as f64).powf((1.0 - p as f64) / 2.0);
        let counts: Vec<f64> = (0..=n).map(|k| tuple_count(n, p, k)).collect();
        let mut table = vec![0.0f64; 1 << n];
        for (w, slot) in table.iter_mut().enumerate() {
            let k = (w as u32).count_ones() as usize;
            if counts[k] > 0.0 {
                *slot = sign * norm * c * counts[k];
            }
        }
        walsh_hadamard_inplace(&mut table);
        Ok(Self {
            energies: table,
            variant,
            n,
            seed: 0,
        })
    }

    /// Wraps an explicit energy table (test support).
    #[cfg(test)]
    pub(crate) fn from_energies(
        n: usize,
        energies: Vec<f64>,
        variant: DisorderVariant,
        seed: u64,
    ) -> Self {
        assert_eq!(energies.len(), 1 << n);
        Self {
            energies,
            variant,
            n,
            seed,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn variant(&self) -> DisorderVariant {
        self.variant
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    #[inline]
    pub fn energy_at(&self, word: u32) -> f64 {
        self.energies[word as usize]
    }

    pub fn energy(&self, sigma: SpinConfiguration) -> f64 {
        assert_eq!(sigma.n(), self.n);
        self.energies[sigma.index()]
    }

    /// `min_σ U(σ) / N` by table scan.
    pub fn ground_state_density(&self) -> f64 {
        self.energies.iter().cloned().fold(f64::INFINITY, f64::min) / self.n as f64
    }

    /// `2^{-N} Σ_σ U(σ)`.
    pub fn mean_energy(&self) -> f64 {
        self.energies.iter().sum::<f64>() / self.energies.len() as f64
    }

    /// Serializes as header + `2^N` little-endian doubles; bit-exact
    /// round trip.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(FILE_MAGIC)?;
        w.write_all(&FILE_VERSION.to_le_bytes())?;
        w.write_all(&[self.variant.tag()])?;
        w.write_all(&(self.variant.p().unwrap_or(0) as u32).to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for &x in &self.energies {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != FILE_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut buf4 = [0u8; 4];
        r.read_exact(&mut buf4)?;
        let version = u32::from_le_bytes(buf4);
        if version != FILE_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let mut tag = [0u8; 1];
        r.read_exact(&mut tag)?;
        r.read_exact(&mut buf4)?;
        let p = u32::from_le_bytes(buf4) as usize;
        r.read_exact(&mut buf4)?;
        let n = u32::from_le_bytes(buf4) as usize;
        let mut buf8 = [0u8; 8];
        r.read_exact(&mut buf8)?;
        let seed = u64::from_le_bytes(buf8);
        let variant = match tag[0] {
            0 => DisorderVariant::StrictPSpin { p },
            1 => DisorderVariant::FullPSpin { p },
            2 => DisorderVariant::Rem,
            t => return Err(Error::Format(format!("unknown variant tag {t}"))),
        };
        if n < 1 || n > MAX_TABLE_N {
            return Err(Error::Format(format!("spin count {n} out of range")));
        }
        let mut energies = vec![0.0f64; 1 << n];
        for slot in &mut energies {
            r.read_exact(&mut buf8)?;
            *slot = f64::from_le_bytes(buf8);
        }
        Ok(Self {
            energies,
            variant,
            n,
            seed,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(f))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

const FILE_MAGIC: &[u8; 8] = b"QPSPINRL";
const FILE_VERSION: u32 = 1;

#[inline]
fn seeded_sign(p: usize) -> f64 {
    if p % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `sqrt(p!/n^{p-1})`, computed as a running product to avoid overflow.
fn strict_scale(n: usize, p: usize) -> f64 {
    let mut ratio = n as f64; // n * prod(i/n) = p!/n^{p-1}
    for i in 1..=p {
        ratio *= i as f64 / n as f64;
    }
    ratio.sqrt()
}

/// Standard deviation of the effective coupling on a support of size `k`
/// for the full-tensor variant, normalization included:
/// `sqrt(N^{1-p} T(n,p,k))` with `T` the number of ordered p-tuples whose
/// odd-multiplicity set has size k.
fn full_support_stds(n: usize, p: usize) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            let v = full_support_variance(n, p, k);
            if v > 0.0 {
                v.sqrt()
            } else {
                0.0
            }
        })
        .collect()
}

/// `N^{1-p} T(n,p,k)` evaluated in normalized form
/// `N 2^{-N} Σ_{i,j} (-1)^{k-i} C(k,i) C(n-k,j) ((2(i+j)-n)/n)^p`,
/// which keeps every term bounded by the binomial weights.
pub(crate) fn full_support_variance(n: usize, p: usize, k: usize) -> f64 {
    if k > n || k > p || (p - k) % 2 != 0 {
        return 0.0;
    }
    let nf = n as f64;
    let mut sum = 0.0f64;
    for i in 0..=k {
        let si = if (k - i) % 2 == 0 { 1.0 } else { -1.0 };
        let ci = binomial(k, i);
        for j in 0..=(n - k) {
            let z = (2.0 * (i + j) as f64 - nf) / nf;
            sum += si * ci * binomial(n - k, j) * z.powi(p as i32);
        }
    }
    let v = nf * sum / (1u64 << n) as f64;
    v.max(0.0)
}

/// Exact count of ordered p-tuples over `{1..n}` whose odd-multiplicity
/// support has size `k` (test hook; small arguments only).
pub(crate) fn tuple_count(n: usize, p: usize, k: usize) -> f64 {
    if k > n || k > p || (p - k) % 2 != 0 {
        return 0.0;
    }
    let nf = n as f64;
    full_support_variance(n, p, k) * nf.powi(p as i32 - 1)
}

/// Exact covariance `E[U(σ) U(τ)]` for a pair at Hamming distance `d`.
///
/// Strict variant: `(p!/N^{p-1}) Σ_k (-1)^k C(d,k) C(n-d,p-k)` (number of
/// p-subsets weighted by how many chosen indices land on disagreeing
/// sites). Full variant: exactly `N r^p`. REM: `N` iff `d = 0`.
pub fn covariance_exact(variant: DisorderVariant, n: usize, d: usize) -> f64 {
    assert!(d <= n, "distance {d} out of range for n={n}");
    match variant {
        DisorderVariant::Rem => {
            if d == 0 {
                n as f64
            } else {
                0.0
            }
        }
        DisorderVariant::FullPSpin { p } => {
            let r = (n as f64 - 2.0 * d as f64) / n as f64;
            n as f64 * r.powi(p as i32)
        }
        DisorderVariant::StrictPSpin { p } => {
            let m = n - d;
            let mut kraw = 0.0f64;
            for k in 0..=p.min(d) {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                kraw += sign * binomial(d, k) * binomial(m, p - k);
            }
            strict_scale(n, p).powi(2) * kraw
        }
    }
}

/// `sup_r |c_{p,N}(r) - r^p|` over the n+1 achievable overlaps; shrinks
/// with n at fixed p for the strict variant and vanishes identically for
/// the full variant.
pub fn covariance_convergence_gap(n: usize, p: usize) -> Result<f64> {
    let variant = DisorderVariant::StrictPSpin { p };
    variant.validate(n)?;
    let mut gap = 0.0f64;
    for d in 0..=n {
        let r = (n as f64 - 2.0 * d as f64) / n as f64;
        let c = covariance_exact(variant, n, d) / n as f64;
        gap = gap.max((c - r.powi(p as i32)).abs());
    }
    Ok(gap)
}

/// Monte Carlo mean and standard error of `U(σ)U(τ)` for a fixed pair at
/// distance `d` over independent realizations seeded
/// `base_seed .. base_seed + num_samples`.
pub fn empirical_covariance(
    variant: DisorderVariant,
    n: usize,
    d: usize,
    num_samples: usize,
    base_seed: u64,
) -> Result<(f64, f64)> {
    if num_samples < 100 {
        return Err(Error::InvalidParameter(
            "empirical covariance needs at least 100 samples".into(),
        ));
    }
    if d > n {
        return Err(Error::InvalidParameter(format!(
            "distance {d} out of range for n={n}"
        )));
    }
    let sigma = 0u32;
    let tau = ((1u64 << d) - 1) as u32;
    let products: Vec<f64> = (0..num_samples)
        .into_par_iter()
        .map(|i| {
            let real = DisorderRealization::sample(variant, n, base_seed.wrapping_add(i as u64))?;
            Ok(real.energy_at(sigma) * real.energy_at(tau))
        })
        .collect::<Result<_>>()?;
    Ok(mean_and_stderr(&products))
}

pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// In-place unnormalized Walsh-Hadamard transform,
/// `F(x) = Σ_y f(y) (-1)^{popcount(x & y)}`.
pub(crate) fn walsh_hadamard_inplace(values: &mut [f64]) {
    let len = values.len();
    debug_assert!(len.is_power_of_two());
    let mut stride = 1usize;
    while stride < len {
        let block = 2 * stride;
        if len >= 1 << 16 && len / block >= 8 {
            values
                .par_chunks_mut(block)
                .for_each(|chunk| butterfly(chunk, stride));
        } else if stride >= 1 << 15 {
            for chunk in values.chunks_mut(block) {
                let (lo, hi) = chunk.split_at_mut(stride);
                lo.par_iter_mut().zip(hi.par_iter_mut()).for_each(|(a, b)| {
                    let x = *a;
                    let y = *b;
                    *a = x + y;
                    *b = x - y;
                });
            }
        } else {
            for chunk in values.chunks_mut(block) {
                butterfly(chunk, stride);
            }
        }
        stride = block;
    }
}

#[inline]
fn butterfly(chunk: &mut [f64], stride: usize) {
    let (lo, hi) = chunk.split_at_mut(stride);
    for i in 0..stride {
        let a = lo[i];
        let b = hi[i];
        lo[i] = a + b;
        hi[i] = a - b;
    }
}
