//! Time averages of Feynman–Kac exponential functionals along ergodic
//! diffusion paths.
//!
//! The crate simulates scalar diffusions, evaluates
//! `e_K(t) = ∫ₜᵀ q(X_s) exp(−∫ₜˢ K(X_τ)dτ) ds` along each path, checks the
//! mean-value representation of `e_K` pathwise, and compares the time
//! average `(1/T)∫₀ᵀ e_K(t)dt` against `∫ (q/K) dm` for the invariant
//! measure `m`, computed by quadrature.

// `!(a < b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fields;
pub mod functional;
pub mod grammar;
pub mod harness;
pub mod measure;
pub mod mvt;
pub mod quad;
pub mod rng;
pub mod sde;

pub use error::{Error, Result};
pub use fields::{check_assumptions, eval_ratio_derivative, AssumptionReport, ScalarField};
pub use functional::{
    cumulative_k, functional_direct, functional_series, time_average, FunctionalSeries,
};
pub use measure::{
    invariant_density, quadrature_q_over_k, truncation_interval, InvariantDensity, QuadratureResult,
};
pub use mvt::{
    boundary_ratio, mvt_identity_check, terminal_ratio_limit, time_change, MvtRecord, MvtVerifier,
};
pub use sde::{simulate_ensemble, simulate_path, SamplePath, SdeModel};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}
