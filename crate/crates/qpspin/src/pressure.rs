//! Classical and quantum pressures per realization, quenched averages,
//! the REM/QREM closed forms and the variational inequality checks.
//!
//! The pressure is `Φ = (1/N)[ln Tr e^{-βH} - N ln 2]`. All log-partition
//! arithmetic runs in log space with shift-by-max, since `e^{-βU}`
//! overflows at `β N` scale.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{DisorderRealization, DisorderVariant};
use crate::geometry;
use crate::krylov;
use crate::lapack;
use crate::operators::{self, HamiltonianSpec};
use crate::rng;
use crate::{Error, Result};

/// REM freezing transition `β_c = sqrt(2 ln 2)`.
pub fn beta_critical() -> f64 {
    (2.0 * std::f64::consts::LN_2).sqrt()
}

/// Overflow-safe `ln cosh x`.
pub fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// `logsumexp` with shift-by-max; empty input gives `-inf`.
pub fn logsumexp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + terms.map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Classical pressure `(1/N)[ln Σ_σ e^{-βU(σ)} - N ln 2]`.
pub fn classical_pressure(real: &DisorderRealization, beta: f64) -> Result<f64> {
    if beta <= 0.0 {
        return Err(Error::InvalidParameter("beta must be positive".into()));
    }
    if real.energies().iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteEnergy);
    }
    let n = real.n() as f64;
    let ln_z = logsumexp(real.energies().iter().map(|&u| -beta * u));
    Ok((ln_z - n * std::f64::consts::LN_2) / n)
}

/// Pressure from a full spectrum: `(1/N)[logsumexp(-β λ) - N ln 2]`.
pub fn pressure_from_spectrum(eigenvalues: &[f64], n: usize, beta: f64) -> f64 {
    let ln_tr = logsumexp(eigenvalues.iter().map(|&l| -beta * l));
    (ln_tr - n as f64 * std::f64::consts::LN_2) / n as f64
}

/// Quantum pressure by full symmetric eigendecomposition (N <= 14, no
/// restriction). The spectrum is cached on the spec, so sweeping β over
/// one spec diagonalizes once.
pub fn quantum_pressure_dense(spec: &HamiltonianSpec, beta: f64) -> Result<f64> {
    if beta <= 0.0 {
        return Err(Error::InvalidParameter("beta must be positive".into()));
    }
    let spectrum = spec.dense_spectrum()?;
    Ok(pressure_from_spectrum(spectrum, spec.n(), beta))
}

/// Hutchinson + Lanczos-quadrature estimate of the quantum pressure.
///
/// Rademacher probes; per probe a `krylov_dim`-step Lanczos sweep with
/// full reorthogonalization yields quadrature nodes and weights. Benign
/// subspace exhaustion truncates the quadrature (exact on the invariant
/// subspace); probes that produce non-finite recursions are discarded,
/// and losing every probe is an error. The standard error comes from the
/// probe variance via the delta method on the log.
pub fn quantum_pressure_stochastic(
    spec: &HamiltonianSpec,
    beta: f64,
    probes: usize,
    krylov_dim: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if beta <= 0.0 {
        return Err(Error::InvalidParameter("beta must be positive".into()));
    }
    if probes < 8 {
        return Err(Error::InvalidParameter("need at least 8 probes".into()));
    }
    if krylov_dim < 30 {
        return Err(Error::InvalidParameter("need krylov_dim >= 30".into()));
    }
    if spec.restriction().is_some() {
        return Err(Error::InvalidParameter(
            "stochastic engine runs on the full cube".into(),
        ));
    }
    let dim = spec.dimension();
    let n = spec.n();

    let log_estimates: Vec<Option<f64>> = (0..probes)
        .into_par_iter()
        .map(|probe| {
            let probe_seed = rng::derive(seed, probe as u64);
            let mut z = vec![0.0f64; dim];
            rng::fill_rademacher(probe_seed, &mut z);
            let tri = krylov::lanczos(
                dim,
                |v, out| spec.apply_into(v, out),
                &z,
                krylov_dim,
                1e-12,
                |_, _| false,
            );
            if tri.alphas.iter().any(|x| !x.is_finite())
                || tri.betas.iter().any(|x| !x.is_finite())
            {
                return None;
            }
            let (nodes, vecs) = lapack::tridiagonal_eigh(&tri.alphas, &tri.betas).ok()?;
            let k = nodes.len();
            // ln Σ_i w_i e^{-β θ_i} with w_i the squared first components.
            let terms: Vec<f64> = (0..k)
                .filter_map(|i| {
                    let w = vecs[i * k] * vecs[i * k];
                    if w > 0.0 {
                        Some(w.ln() - beta * nodes[i])
                    } else {
                        None
                    }
                })
                .collect();
            if terms.is_empty() {
                return None;
            }
            Some(logsumexp(terms.iter().copied()))
        })
        .collect();

    let kept: Vec<f64> = log_estimates.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::AllProbesFailed);
    }
    let m = kept.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = kept.iter().map(|l| (l - m).exp()).collect();
    let count = scaled.len() as f64;
    let mean_u = scaled.iter().sum::<f64>() / count;
    let value = (m + mean_u.ln()) / n as f64;
    if scaled.len() < 2 {
        return Ok((value, 0.0));
    }
    let var_u = scaled.iter().map(|u| (u - mean_u).powi(2)).sum::<f64>() / (count - 1.0);
    let stderr = (var_u / count).sqrt() / mean_u / n as f64;
    Ok((value, stderr))
}

/// Which engine evaluates per-realization pressures in sweeps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TraceEngine {
    Dense,
    Stochastic { probes: usize, krylov_dim: usize },
}

/// Method provenance recorded on every estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PressureMethod {
    ClassicalExact,
    DenseEig,
    StochasticLanczos,
    ClosedForm,
}

impl PressureMethod {
    pub fn label(&self) -> &'static str {
        match self {
            PressureMethod::ClassicalExact => "classical-exact",
            PressureMethod::DenseEig => "dense-eig",
            PressureMethod::StochasticLanczos => "stochastic-lanczos",
            PressureMethod::ClosedForm => "closed-form",
        }
    }
}

/// A quenched pressure value with its noise decomposition.
#[derive(Clone, Debug)]
pub struct PressureEstimate {
    pub value: f64,
    /// Combined standard error (disorder and trace noise in quadrature).
    pub stderr: f64,
    /// Disorder-only component (trace noise deflated).
    pub disorder_stderr: f64,
    /// Trace-probe component.
    pub trace_stderr: f64,
    pub num_samples: usize,
    pub method: PressureMethod,
    pub beta: f64,
    pub gamma: f64,
}

/// Per-realization pressures for seeds `base_seed .. base_seed + count`,
/// each with its trace standard error (zero for exact engines).
pub fn pressure_samples(
    variant: DisorderVariant,
    n: usize,
    beta: f64,
    gamma: f64,
    count: usize,
    base_seed: u64,
    engine: TraceEngine,
) -> Result<Vec<(f64, f64)>> {
    (0..count)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed.wrapping_add(i as u64);
            let real = DisorderRealization::sample(variant, n, seed)?;
            if gamma == 0.0 {
                return Ok((classical_pressure(&real, beta)?, 0.0));
            }
            match engine {
                TraceEngine::Dense => {
                    let spec = HamiltonianSpec::new(&real, gamma);
                    Ok((quantum_pressure_dense(&spec, beta)?, 0.0))
                }
                TraceEngine::Stochastic { probes, krylov_dim } => {
                    let spec = HamiltonianSpec::new(&real, gamma);
                    quantum_pressure_stochastic(
                        &spec,
                        beta,
                        probes,
                        krylov_dim,
                        rng::derive(seed, 0x7C4E),
                    )
                }
            }
        })
        .collect()
}

/// Mean pressure over independent disorder seeds.
pub fn quenched_pressure(
    variant: DisorderVariant,
    n: usize,
    beta: f64,
    gamma: f64,
    num_disorder: usize,
    base_seed: u64,
    engine: TraceEngine,
) -> Result<PressureEstimate> {
    if num_disorder < 2 {
        return Err(Error::InvalidParameter(
            "quenched average needs at least 2 realizations".into(),
        ));
    }
    let samples = pressure_samples(variant, n, beta, gamma, num_disorder, base_seed, engine)?;
    let values: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let (mean, total_se) = crate::disorder::mean_and_stderr(&values);
    let m = num_disorder as f64;
    let trace_var_of_mean = samples.iter().map(|s| s.1 * s.1).sum::<f64>() / (m * m);
    let trace_stderr = trace_var_of_mean.sqrt();
    let disorder_stderr = (total_se * total_se - trace_var_of_mean).max(0.0).sqrt();
    let method = if gamma == 0.0 {
        PressureMethod::ClassicalExact
    } else {
        match engine {
            TraceEngine::Dense => PressureMethod::DenseEig,
            TraceEngine::Stochastic { .. } => PressureMethod::StochasticLanczos,
        }
    };
    Ok(PressureEstimate {
        value: mean,
        stderr: (disorder_stderr * disorder_stderr + trace_var_of_mean).sqrt(),
        disorder_stderr,
        trace_stderr,
        num_samples: num_disorder,
        method,
        beta,
        gamma,
    })
}

/// REM pressure: `β²/2` up to `β_c`, then `β β_c - β_c²/2`; continuous
/// and C¹ at the transition.
pub fn rem_pressure(beta: f64) -> f64 {
    assert!(beta >= 0.0, "inverse temperature must be nonnegative");
    let bc = beta_critical();
    if beta <= bc {
        0.5 * beta * beta
    } else {
        beta * bc - 0.5 * bc * bc
    }
}

/// QREM pressure `max{Φ_∞(β,0), ln cosh(βΓ)}`.
pub fn qrem_pressure(beta: f64, gamma: f64) -> f64 {
    assert!(beta > 0.0 && gamma >= 0.0);
    rem_pressure(beta).max(ln_cosh(beta * gamma))
}

/// Critical transverse field `Γ_c(β) = β^{-1} arcosh(e^{Φ_∞(β,0)})`,
/// evaluated as `x + ln(1 + sqrt(1 - e^{-2x}))` to avoid overflow.
pub fn critical_field(beta: f64) -> f64 {
    assert!(beta > 0.0);
    let x = rem_pressure(beta);
    (x + (1.0 + (1.0 - (-2.0 * x).exp()).sqrt()).ln()) / beta
}

/// Exclusion band around the transition lines where the 1/p correction
/// formula has no prescription.
const TRANSITION_BAND: f64 = 1e-12;

/// Second-order-perturbation 1/p correction to the QREM pressure
/// (non-rigorous; evaluated, never asserted).
pub fn one_over_p_correction(beta: f64, gamma: f64, p: usize) -> Result<f64> {
    if beta <= 0.0 || gamma < 0.0 || p == 0 {
        return Err(Error::InvalidParameter(
            "need beta > 0, gamma >= 0, p >= 1".into(),
        ));
    }
    let gc = critical_field(beta);
    if (gamma - gc).abs() < TRANSITION_BAND {
        return Err(Error::UndefinedAtTransition { beta, gamma });
    }
    let base = qrem_pressure(beta, gamma);
    let term = if gamma > gc {
        beta / (2.0 * gamma * (beta * gamma).tanh())
    } else {
        let bc = beta_critical();
        if (beta - bc).abs() < TRANSITION_BAND {
            return Err(Error::UndefinedAtTransition { beta, gamma });
        }
        if beta < bc {
            gamma * gamma / 2.0
        } else {
            gamma * gamma * beta / (2.0 * bc)
        }
    };
    Ok(base + term / p as f64)
}

/// Outcome of the Gibbs variational lower bound on one realization.
#[derive(Clone, Copy, Debug)]
pub struct GibbsBound {
    pub lhs: f64,
    pub rhs_classical: f64,
    pub rhs_paramagnet: f64,
    pub holds: bool,
}

/// Verifies `Φ(β,Γ) >= max{Φ(β,0), ln cosh(βΓ) - (β/N) mean U}` to 1e-9.
///
/// The classical Gibbs trial state gives the first branch exactly (T has
/// zero diagonal); the paramagnet trial state gives the second with the
/// realization's empirical mean energy.
pub fn gibbs_bound_check(real: &DisorderRealization, beta: f64, gamma: f64) -> Result<GibbsBound> {
    let spec = HamiltonianSpec::new(real, gamma);
    let lhs = quantum_pressure_dense(&spec, beta)?;
    let rhs_classical = classical_pressure(real, beta)?;
    let rhs_paramagnet = ln_cosh(beta * gamma) - beta * real.mean_energy() / real.n() as f64;
    let holds = lhs >= rhs_classical.max(rhs_paramagnet) - 1e-9;
    Ok(GibbsBound {
        lhs,
        rhs_classical,
        rhs_paramagnet,
        holds,
    })
}

/// Outcome of the direct-sum upper bound on one realization. All traces
/// are reported as logarithms.
#[derive(Clone, Debug)]
pub struct DecompositionBound {
    /// `ln Tr e^{-βH}`.
    pub ln_lhs: f64,
    /// `ln [ e^{βΓ‖T_+‖} (Tr_L e^{-βU} + Tr_{L^c} e^{-βH_c}) ]`.
    pub ln_rhs_split: f64,
    /// Same with `Tr_{L^c} e^{-βH_c}` relaxed to `e^{βεN} (2 cosh βΓ)^N`.
    pub ln_rhs_relaxed: f64,
    /// `ln Tr_{L^c} e^{-βH_c}` (`-inf` when the complement is empty).
    pub ln_restricted_trace: f64,
    /// `ln Tr_{L^c} e^{βΓT_c}`.
    pub ln_restricted_paramagnet: f64,
    /// `‖T_{L_ε^+}‖`.
    pub t_norm: f64,
    pub deep_hole_count: usize,
    /// True when `L_ε` is the whole cube (empty complement).
    pub degenerate_split: bool,
    pub holds: bool,
}

const BOUND_TOLERANCE: f64 = 1e-9;

/// Checks the trace inequality chain behind the direct-sum decomposition:
///
/// 1. `Tr e^{-βH} <= e^{βΓ‖T_+‖}(Tr_L e^{-βU} + Tr_{L^c} e^{-βH_c})`
/// 2. `Tr_{L^c} e^{-βH_c} <= e^{βεN} Tr_{L^c} e^{βΓT_c}`
/// 3. `Tr_{L^c} e^{βΓT_c} <= (2 cosh βΓ)^N`
///
/// computed exactly on dense restricted blocks, compared in log space.
pub fn decomposition_bound_check(
    real: &DisorderRealization,
    beta: f64,
    gamma: f64,
    epsilon: f64,
) -> Result<DecompositionBound> {
    if beta <= 0.0 || gamma < 0.0 || epsilon <= 0.0 {
        return Err(Error::InvalidParameter(
            "need beta > 0, gamma >= 0, epsilon > 0".into(),
        ));
    }
    let n = real.n();
    let spec = HamiltonianSpec::new(real, gamma);
    let ln_lhs = logsumexp(spec.dense_spectrum()?.iter().map(|&l| -beta * l));

    let holes = geometry::deep_holes(real, epsilon);
    let deep_mask = holes.mask();
    let deep_hole_count = deep_mask.cardinality();
    let augmented = geometry::augment(deep_mask);
    let complement = deep_mask.complement();
    let degenerate_split = complement.is_empty();

    let t_norm = if augmented.is_empty() {
        0.0
    } else {
        operators::operator_norm(&augmented)?
    };

    // Tr over the deep-hole block of the diagonal part.
    let deep_terms: Vec<f64> = deep_mask
        .iter()
        .map(|w| -beta * real.energy_at(w))
        .collect();
    let ln_deep = logsumexp(deep_terms.iter().copied());

    // Tr over the complement block of the restricted Hamiltonian and of
    // the restricted paramagnet.
    let (ln_restricted_trace, ln_restricted_paramagnet) = if degenerate_split {
        (f64::NEG_INFINITY, f64::NEG_INFINITY)
    } else {
        let restricted = HamiltonianSpec::with_restriction(real, gamma, &complement)?;
        let dense = operators::dense_matrix(&restricted)?;
        let dim = dense.members.len();
        let evals = lapack::symmetric_eigenvalues(dense.entries, dim)?;
        let ln_h = logsumexp(evals.iter().map(|&l| -beta * l));
        let adj = operators::dense_restricted_adjacency(&complement)?;
        let tvals = lapack::symmetric_eigenvalues(adj.entries, dim)?;
        let ln_t = logsumexp(tvals.iter().map(|&l| beta * gamma * l));
        (ln_h, ln_t)
    };

    let nf = n as f64;
    let ln_rhs_split =
        beta * gamma * t_norm + logsumexp([ln_deep, ln_restricted_trace].into_iter());
    let relaxed_tail = beta * epsilon * nf + nf * (std::f64::consts::LN_2 + ln_cosh(beta * gamma));
    let ln_rhs_relaxed = beta * gamma * t_norm + logsumexp([ln_deep, relaxed_tail].into_iter());

    let stage1 = ln_lhs <= ln_rhs_split + BOUND_TOLERANCE;
    let stage2 = ln_restricted_trace
        <= beta * epsilon * nf + ln_restricted_paramagnet + BOUND_TOLERANCE;
    let stage3 = ln_restricted_paramagnet
        <= nf * (std::f64::consts::LN_2 + ln_cosh(beta * gamma)) + BOUND_TOLERANCE;
    Ok(DecompositionBound {
        ln_lhs,
        ln_rhs_split,
        ln_rhs_relaxed,
        ln_restricted_trace,
        ln_restricted_paramagnet,
        t_norm,
        deep_hole_count,
        degenerate_split,
        holds: stage1 && stage2 && stage3,
    })
}

/// One serialized result row (the JSON external interface).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PressureRecord {
    pub method: String,
    pub variant: String,
    pub p: Option<usize>,
    pub n: usize,
    pub beta: f64,
    pub gamma: f64,
    pub value: f64,
    pub stderr: f64,
    pub num_samples: usize,
    pub seed_range: [u64; 2],
    pub wall_time_s: f64,
}

impl PressureRecord {
    pub fn from_estimate(
        estimate: &PressureEstimate,
        variant: DisorderVariant,
        n: usize,
        base_seed: u64,
        started: Instant,
    ) -> Self {
        Self {
            method: estimate.method.label().to_string(),
            variant: variant.label().to_string(),
            p: variant.p(),
            n,
            beta: estimate.beta,
            gamma: estimate.gamma,
            value: estimate.value,
            stderr: estimate.stderr,
            num_samples: estimate.num_samples,
            seed_range: [
                base_seed,
                base_seed.wrapping_add(estimate.num_samples as u64 - 1),
            ],
            wall_time_s: started.elapsed().as_secs_f64(),
        }
    }
}
