//! Matrix-free action of `H = U_p - Γ T` on `l²(Q_N)`, subset
//! restrictions, dense materialization at small sizes and extremal
//! eigenvalues of restricted adjacency operators.
//!
//! `T` is the hypercube adjacency: `(Tψ)(σ) = Σ_j ψ(F_j σ)`. Its action
//! enumerates the N single-bit flips, so one matvec costs `O(N 2^N)` and
//! no adjacency is ever stored. Restrictions mask both input and output
//! components, which is the same as the submatrix convention.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::disorder::DisorderRealization;
use crate::hypercube::{SpinConfiguration, SubsetMask};
use crate::krylov;
use crate::lapack;
use crate::rng;
use crate::{Error, Result};

/// Largest compressed domain the dense oracle will materialize.
pub const DENSE_DOMAIN_CAP: usize = 1 << 14;

/// State vectors are plain amplitude tables indexed by configuration word.
pub type StateVector = Vec<f64>;

/// A disorder realization paired with a transverse field strength and an
/// optional domain restriction.
pub struct HamiltonianSpec<'a> {
    disorder: &'a DisorderRealization,
    gamma: f64,
    restriction: Option<&'a SubsetMask>,
    spectrum: OnceLock<Vec<f64>>,
}

impl<'a> HamiltonianSpec<'a> {
    pub fn new(disorder: &'a DisorderRealization, gamma: f64) -> Self {
        assert!(gamma >= 0.0, "field strength must be nonnegative");
        Self {
            disorder,
            gamma,
            restriction: None,
            spectrum: OnceLock::new(),
        }
    }

    pub fn with_restriction(
        disorder: &'a DisorderRealization,
        gamma: f64,
        restriction: &'a SubsetMask,
    ) -> Result<Self> {
        if restriction.n() != disorder.n() {
            return Err(Error::DimensionMismatch {
                expected: disorder.n(),
                actual: restriction.n(),
            });
        }
        let mut spec = Self::new(disorder, gamma);
        spec.restriction = Some(restriction);
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.disorder.n()
    }

    pub fn dimension(&self) -> usize {
        1 << self.n()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn disorder(&self) -> &DisorderRealization {
        self.disorder
    }

    pub fn restriction(&self) -> Option<&SubsetMask> {
        self.restriction
    }

    /// `out = H v`, matrix-free. Panics on length mismatch.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let dim = self.dimension();
        assert_eq!(v.len(), dim, "state vector has wrong dimension");
        assert_eq!(out.len(), dim, "output vector has wrong dimension");
        let n = self.n();
        let u = self.disorder.energies();
        let gamma = self.gamma;
        let kernel = |w: usize, out_slot: &mut f64| match self.restriction {
            None => {
                let mut acc = u[w] * v[w];
                if gamma != 0.0 {
                    let mut hop = 0.0;
                    for j in 0..n {
                        hop += v[w ^ (1 << j)];
                    }
                    acc -= gamma * hop;
                }
                *out_slot = acc;
            }
            Some(mask) => {
                if !mask.contains(w as u32) {
                    *out_slot = 0.0;
                    return;
                }
                let mut acc = u[w] * v[w];
                if gamma != 0.0 {
                    let mut hop = 0.0;
                    for j in 0..n {
                        let nb = w ^ (1 << j);
                        if mask.contains(nb as u32) {
                            hop += v[nb];
                        }
                    }
                    acc -= gamma * hop;
                }
                *out_slot = acc;
            }
        };
        if dim >= 1 << 14 {
            out.par_iter_mut()
                .enumerate()
                .for_each(|(w, slot)| kernel(w, slot));
        } else {
            for (w, slot) in out.iter_mut().enumerate() {
                kernel(w, slot);
            }
        }
    }

    pub fn apply(&self, v: &[f64]) -> StateVector {
        let mut out = vec![0.0; self.dimension()];
        self.apply_into(v, &mut out);
        out
    }

    /// Full spectrum of the full-cube Hamiltonian, ascending; cached on
    /// first use. Requires no restriction and `|domain| <= 2^14`.
    pub fn dense_spectrum(&self) -> Result<&[f64]> {
        if self.restriction.is_some() {
            return Err(Error::InvalidParameter(
                "dense spectrum is defined for the unrestricted Hamiltonian".into(),
            ));
        }
        if self.dimension() > DENSE_DOMAIN_CAP {
            return Err(Error::DomainTooLarge {
                size: self.dimension(),
                cap: DENSE_DOMAIN_CAP,
            });
        }
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let dense = dense_matrix(self)?;
        let vals = lapack::symmetric_eigenvalues(dense.entries, dense.members.len())?;
        Ok(self.spectrum.get_or_init(|| vals))
    }
}

/// Dense symmetric materialization over the (possibly restricted) domain,
/// with compressed indexing.
pub struct DenseMatrix {
    /// Domain member words in increasing order; row/column `i` of
    /// `entries` corresponds to `members[i]`.
    pub members: Vec<u32>,
    /// Row-major `dim x dim` entries (symmetric).
    pub entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn dim(&self) -> usize {
        self.members.len()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.members.len() + j]
    }
}

/// Materializes `H` over the spec's domain. Oracle for small sizes;
/// errors when the domain exceeds [`DENSE_DOMAIN_CAP`].
pub fn dense_matrix(spec: &HamiltonianSpec) -> Result<DenseMatrix> {
    let n = spec.n();
    let members: Vec<u32> = match spec.restriction() {
        None => (0..1u32 << n).collect(),
        Some(mask) => mask.members(),
    };
    if members.is_empty() {
        return Err(Error::EmptyDomain);
    }
    if members.len() > DENSE_DOMAIN_CAP {
        return Err(Error::DomainTooLarge {
            size: members.len(),
            cap: DENSE_DOMAIN_CAP,
        });
    }
    let dim = members.len();
    let index_of = compressed_index(n, &members);
    let u = spec.disorder().energies();
    let gamma = spec.gamma();
    let mut entries = vec![0.0f64; dim * dim];
    for (i, &w) in members.iter().enumerate() {
        entries[i * dim + i] = u[w as usize];
        if gamma == 0.0 {
            continue;
        }
        for j in 0..n {
            let nb = w ^ (1 << j);
            if let Some(k) = index_of[nb as usize] {
                entries[i * dim + k] = -gamma;
            }
        }
    }
    Ok(DenseMatrix { members, entries })
}

/// Dense adjacency of `T` restricted to `domain` (compressed indexing).
pub fn dense_restricted_adjacency(domain: &SubsetMask) -> Result<DenseMatrix> {
    let n = domain.n();
    let members = domain.members();
    if members.is_empty() {
        return Err(Error::EmptyDomain);
    }
    if members.len() > DENSE_DOMAIN_CAP {
        return Err(Error::DomainTooLarge {
            size: members.len(),
            cap: DENSE_DOMAIN_CAP,
        });
    }
    let dim = members.len();
    let index_of = compressed_index(n, &members);
    let mut entries = vec![0.0f64; dim * dim];
    for (i, &w) in members.iter().enumerate() {
        for j in 0..n {
            let nb = w ^ (1 << j);
            if let Some(k) = index_of[nb as usize] {
                entries[i * dim + k] = 1.0;
            }
        }
    }
    Ok(DenseMatrix { members, entries })
}

fn compressed_index(n: usize, members: &[u32]) -> Vec<Option<usize>> {
    let mut map = vec![None; 1 << n];
    for (i, &w) in members.iter().enumerate() {
        map[w as usize] = Some(i);
    }
    map
}

/// Matrix element of the restricted transverse-field operator: 1 iff both
/// endpoints lie in `domain` and differ in exactly one spin.
pub fn restricted_t_matrix_element(
    domain: &SubsetMask,
    a: SpinConfiguration,
    b: SpinConfiguration,
) -> u8 {
    assert_eq!(a.n(), b.n(), "configurations live on different cubes");
    assert_eq!(a.n(), domain.n(), "mask lives on a different cube");
    let adjacent = a.hamming_distance(b) == 1;
    if adjacent && domain.contains(a.bits()) && domain.contains(b.bits()) {
        1
    } else {
        0
    }
}

/// Absolute iteration tolerance for extremal eigenvalues of `T_A`.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Hard cap on the Lanczos basis kept by [`operator_norm`].
const NORM_MAX_DIM: usize = 2000;

/// Operator norm of the hypercube adjacency restricted to `domain`.
///
/// Lanczos with full reorthogonalization on the compressed adjacency,
/// converged when the extremal Ritz residual drops below
/// [`NORM_TOLERANCE`]; benign subspace exhaustion returns the exact value
/// and failure to converge is an explicit error.
pub fn operator_norm(domain: &SubsetMask) -> Result<f64> {
    operator_norm_over_members(domain.n(), &domain.members())
}

/// Same as [`operator_norm`], taking the member list directly.
pub fn operator_norm_over_members(n: usize, members: &[u32]) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let dim = members.len();
    if dim == 1 {
        return Ok(0.0);
    }
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    let index_of = compressed_index(n, &sorted);
    // Compressed edge list: i < k pairs at Hamming distance one.
    let mut edges: Vec<(u32, u32)> = Vec::new();
    for (i, &w) in sorted.iter().enumerate() {
        for j in 0..n {
            let nb = w ^ (1 << j);
            if let Some(k) = index_of[nb as usize] {
                if k > i {
                    edges.push((i as u32, k as u32));
                }
            }
        }
    }
    if edges.is_empty() {
        return Ok(0.0);
    }

    let start: Vec<f64> = (0..dim)
        .map(|i| rng::standard_normal(0x0517_ED0C_5A11_CE00, i as u64))
        .collect();
    let matvec = |v: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|x| *x = 0.0);
        for &(i, k) in &edges {
            out[i as usize] += v[k as usize];
            out[k as usize] += v[i as usize];
        }
    };

    let max_dim = dim.min(NORM_MAX_DIM);
    let mut converged_norm: Option<f64> = None;
    let mut last_residual = f64::INFINITY;
    let tri = krylov::lanczos(dim, matvec, &start, max_dim, 1e-13, |alphas, betas| {
        // Convergence test on the extremal Ritz pair; the off-diagonal
        // produced by the *next* step is not known yet, so test with the
        // current residual bound once at least two steps exist.
        if alphas.len() < 2 {
            return false;
        }
        let k = alphas.len();
        let (vals, vecs) = match lapack::tridiagonal_eigh(alphas, betas) {
            Ok(x) => x,
            Err(_) => return false,
        };
        let (mut best, mut best_idx) = (0.0f64, 0usize);
        for (i, &v) in vals.iter().enumerate() {
            if v.abs() > best {
                best = v.abs();
                best_idx = i;
            }
        }
        // beta_k of the last completed step bounds the residual through
        // the bottom eigenvector component.
        let beta_last = betas.last().copied().unwrap_or(0.0);
        let bottom = vecs[(k - 1) + best_idx * k].abs();
        last_residual = beta_last * bottom;
        if last_residual <= NORM_TOLERANCE {
            converged_norm = Some(best);
            true
        } else {
            false
        }
    });
    if let Some(norm) = converged_norm {
        return Ok(norm);
    }
    if tri.alphas.iter().any(|x| !x.is_finite()) {
        return Err(Error::NoConvergence {
            iterations: tri.alphas.len(),
            residual: f64::NAN,
        });
    }
    if tri.exhausted || tri.alphas.len() == dim {
        // Krylov space exhausted: Ritz values are exact.
        let (vals, _) = lapack::tridiagonal_eigh(&tri.alphas, &tri.betas)?;
        return Ok(vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs())));
    }
    Err(Error::NoConvergence {
        iterations: tri.alphas.len(),
        residual: last_residual,
    })
}
