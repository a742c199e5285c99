//! Desk-scale numerical laboratory for quantum p-spin glasses in a
//! transverse magnetic field.
//!
//! The crate simulates Gaussian energy landscapes on the Hamming cube
//! `Q_N = {-1,+1}^N`, applies the transverse-field Hamiltonian
//! `H = U_p - Γ T` without ever materializing it, and evaluates classical
//! and quantum pressures per disorder realization together with the
//! closed-form REM/QREM expressions they converge to. A geometry module
//! implements the cluster machinery used to control restricted
//! transverse-field norms: deep-hole sets, 1-step augmentation, maximal
//! r-connected components, last-exit path extraction and the
//! `(r_p, L_p, c_p)` parameter schedule.
//!
//! Everything is deterministic: disorder, probe vectors and experiment
//! drivers derive from explicit 64-bit seeds through a counter-based
//! generator, so identical inputs reproduce identical tables bit for bit
//! regardless of thread count.

pub mod disorder;
pub mod geometry;
pub mod hypercube;
pub mod operators;
pub mod pressure;
pub mod rng;

mod krylov;
mod lapack;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("spin count n={n} exceeds cap {cap}")]
    SpinCountTooLarge { n: usize, cap: usize },
    #[error("interaction order p={p} invalid for n={n}")]
    InvalidInteractionOrder { p: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("domain of size {size} exceeds dense cap {cap}")]
    DomainTooLarge { size: usize, cap: usize },
    #[error("operation requires a nonempty domain")]
    EmptyDomain,
    #[error("extremal eigenvalue iteration did not reach tolerance after {iterations} steps (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("all stochastic trace probes failed")]
    AllProbesFailed,
    #[error("1/p correction undefined on the transition line (beta={beta}, gamma={gamma})")]
    UndefinedAtTransition { beta: f64, gamma: f64 },
    #[error("schedule inadmissible at p={p}: {reason}")]
    ScheduleInadmissible { p: usize, reason: String },
    #[error("input set is not r-connected at scale r={r}")]
    NotRConnected { r: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite energy encountered")]
    NonFiniteEnergy,
    #[error("LAPACK {routine} failed with info={info}")]
    Lapack { routine: &'static str, info: i32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed realization file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
