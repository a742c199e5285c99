//! Lanczos tridiagonalization with full reorthogonalization.
//!
//! Shared by the restricted-norm solver (extremal eigenvalues of `T_A`)
//! and the stochastic trace engine (quadrature nodes and weights per
//! probe). Basis vectors are kept and every new direction is
//! reorthogonalized against all of them twice, so the recursion stays
//! numerically orthogonal up to the few hundred steps used here.

/// Outcome of a Lanczos sweep: tridiagonal coefficients and how the sweep
/// ended.
pub(crate) struct Tridiagonal {
    /// Diagonal entries `alpha_0 .. alpha_{k-1}`.
    pub alphas: Vec<f64>,
    /// Off-diagonal entries `beta_1 .. beta_{k-1}` (coupling step j to j+1).
    pub betas: Vec<f64>,
    /// True when the recursion found an invariant subspace (benign early
    /// termination: the quadrature/Ritz data is exact on that subspace).
    pub exhausted: bool,
}

/// Runs the Lanczos recursion from `start` (need not be normalized).
///
/// `on_step(alphas, betas)` is called after each completed step; returning
/// `true` stops the sweep (used for convergence tests). The sweep also
/// stops at `max_dim` steps or when the residual norm falls below
/// `breakdown_tol` (treated as subspace exhaustion, not failure).
pub(crate) fn lanczos<F>(
    dim: usize,
    mut matvec: F,
    start: &[f64],
    max_dim: usize,
    breakdown_tol: f64,
    mut on_step: impl FnMut(&[f64], &[f64]) -> bool,
) -> Tridiagonal
where
    F: FnMut(&[f64], &mut [f64]),
{
    assert_eq!(start.len(), dim);
    let max_dim = max_dim.min(dim);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_dim);
    let mut alphas = Vec::with_capacity(max_dim);
    let mut betas = Vec::with_capacity(max_dim.saturating_sub(1));

    let norm0 = norm(start);
    assert!(norm0 > 0.0, "Lanczos start vector must be nonzero");
    let mut v: Vec<f64> = start.iter().map(|x| x / norm0).collect();
    let mut w = vec![0.0f64; dim];

    loop {
        matvec(&v, &mut w);
        let alpha = dot(&v, &w);
        alphas.push(alpha);
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi -= alpha * vi;
        }
        if let Some(prev) = basis.last() {
            let beta_prev = *betas.last().unwrap();
            for (wi, pi) in w.iter_mut().zip(prev) {
                *wi -= beta_prev * pi;
            }
        }
        basis.push(std::mem::replace(&mut v, Vec::new()));
        // Two rounds of full reorthogonalization.
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                for (wi, bi) in w.iter_mut().zip(b) {
                    *wi -= c * bi;
                }
            }
        }
        if on_step(&alphas, &betas) {
            return Tridiagonal {
                alphas,
                betas,
                exhausted: false,
            };
        }
        if alphas.len() == max_dim {
            return Tridiagonal {
                alphas,
                betas,
                exhausted: false,
            };
        }
        let beta = norm(&w);
        if !beta.is_finite() {
            // Surfaced to callers through the NaN coefficients.
            alphas.push(f64::NAN);
            return Tridiagonal {
                alphas,
                betas,
                exhausted: false,
            };
        }
        if beta <= breakdown_tol {
            return Tridiagonal {
                alphas,
                betas,
                exhausted: true,
            };
        }
        betas.push(beta);
        v = w.iter().map(|x| x / beta).collect();
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
