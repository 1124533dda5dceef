//! Invariant densities of the catalog diffusions and the ergodic target
//! `∫ (q/K) dm`.

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::quad::{adaptive_simpson, Panel};
use crate::sde::SdeModel;
use crate::Interval;

pub const DEFAULT_REL_TOL: f64 = 1e-9;
pub const DEFAULT_TAIL_MASS_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_EVALUATIONS: usize = 2_000_000;

/// Relative tolerance for the double-well normalizing constant.
const NORMALIZATION_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityKind {
    Gaussian {
        mean: f64,
        var: f64,
    },
    /// `∝ exp(−2(U(x) − U_min)/σ²)` with `U(x) = a·x⁴/4 − b·x²/2`.
    DoubleWell {
        a: f64,
        b: f64,
        sigma: f64,
    },
    PointMass {
        x0: f64,
    },
}

impl DensityKind {
    /// Density up to the normalization; the double well is scaled so its
    /// peak is exactly 1.
    fn unnormalized(&self, x: f64) -> f64 {
        match *self {
            DensityKind::Gaussian { mean, var } => {
                let z = x - mean;
                (-z * z / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
            }
            DensityKind::DoubleWell { a, b, sigma } => {
                let u = a * x.powi(4) / 4.0 - b * x * x / 2.0;
                let u_min = -b * b / (4.0 * a);
                (-2.0 * (u - u_min) / (sigma * sigma)).exp()
            }
            DensityKind::PointMass { .. } => 0.0,
        }
    }

    fn truncation(&self, tail_mass_tol: f64) -> Interval {
        match *self {
            DensityKind::Gaussian { mean, var } => {
                // P(Z > z) = erfc(z/√2)/2 = tol/2
                let z = std::f64::consts::SQRT_2 * erfc_inv(tail_mass_tol);
                let half = z * var.sqrt();
                Interval::new(mean - half, mean + half)
            }
            DensityKind::DoubleWell { a, b, .. } => {
                let mut half = (b / a).sqrt().max(1.0);
                while self.unnormalized(half) >= tail_mass_tol {
                    half *= 1.1;
                }
                Interval::new(-half, half)
            }
            DensityKind::PointMass { x0 } => Interval::new(x0, x0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantDensity {
    pub kind: DensityKind,
    pub normalization: f64,
    pub support: Interval,
    /// Probability mass outside `support`.
    pub tail_mass: f64,
}

impl InvariantDensity {
    pub fn from_kind(kind: DensityKind, tail_mass_tol: f64) -> Result<Self> {
        let support = kind.truncation(tail_mass_tol);
        let (normalization, tail_mass) = match kind {
            DensityKind::Gaussian { .. } => (1.0, tail_mass_tol),
            DensityKind::PointMass { .. } => (1.0, 0.0),
            DensityKind::DoubleWell { .. } => {
                let f = |x: f64| kind.unnormalized(x);
                let z = adaptive_simpson(
                    f,
                    support.lo,
                    support.hi,
                    NORMALIZATION_REL_TOL,
                    DEFAULT_MAX_EVALUATIONS,
                )?
                .value;
                // quartic tails: mass beyond 2× the cutoff is negligible
                let tail = adaptive_simpson(
                    f,
                    support.hi,
                    2.0 * support.hi,
                    1e-6,
                    DEFAULT_MAX_EVALUATIONS,
                )?
                .value;
                (z, 2.0 * tail / z)
            }
        };
        Ok(InvariantDensity {
            kind,
            normalization,
            support,
            tail_mass,
        })
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.kind.unnormalized(x) / self.normalization
    }

    /// One draw from the density.
    pub fn sample(&self, rng: &mut impl Rng) -> Result<f64> {
        match self.kind {
            DensityKind::Gaussian { mean, var } => {
                let z: f64 = rng.sample(StandardNormal);
                Ok(mean + var.sqrt() * z)
            }
            DensityKind::PointMass { x0 } => Ok(x0),
            DensityKind::DoubleWell { .. } => {
                // rejection from the uniform law on the support; peak is 1
                let Interval { lo, hi } = self.support;
                for _ in 0..1_000_000 {
                    let x = lo + (hi - lo) * rng.random::<f64>();
                    if rng.random::<f64>() < self.kind.unnormalized(x) {
                        return Ok(x);
                    }
                }
                Err(Error::config("x0", "rejection sampler failed to accept"))
            }
        }
    }
}

pub fn invariant_density(model: &SdeModel) -> Result<InvariantDensity> {
    let kind = match *model {
        SdeModel::Ou { theta, mu, sigma } if sigma > 0.0 => DensityKind::Gaussian {
            mean: mu,
            var: sigma * sigma / (2.0 * theta),
        },
        SdeModel::Ou { mu, .. } => DensityKind::PointMass { x0: mu },
        SdeModel::DoubleWell { a, b, sigma } => DensityKind::DoubleWell { a, b, sigma },
        SdeModel::ConstantState { x0 } => DensityKind::PointMass { x0 },
    };
    InvariantDensity::from_kind(kind, DEFAULT_TAIL_MASS_TOL)
}

pub fn truncation_interval(m: &InvariantDensity, tail_mass_tol: f64) -> Result<Interval> {
    if !(tail_mass_tol > 0.0 && tail_mass_tol < 1e-2) {
        return Err(Error::config("tail_mass_tol", "must lie in (0, 1e-2)"));
    }
    Ok(m.kind.truncation(tail_mass_tol))
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    /// Adaptive error estimate plus `tail_mass · sup|f|`.
    pub abs_error_estimate: f64,
    pub evaluations: usize,
    pub support_used: Interval,
    pub truncation_error_bound: f64,
    pub panels: Vec<Panel>,
}

/// `∫ f dm` over the truncated support.
pub fn integrate_against<F>(m: &InvariantDensity, f: F, rel_tol: f64) -> Result<QuadratureResult>
where
    F: Fn(f64) -> f64,
{
    if !(rel_tol > 1e-14 && rel_tol < 1e-2) {
        return Err(Error::config("rel_tol", "must lie in (1e-14, 1e-2)"));
    }
    if let DensityKind::PointMass { x0 } = m.kind {
        return Ok(QuadratureResult {
            value: f(x0),
            abs_error_estimate: 0.0,
            evaluations: 1,
            support_used: m.support,
            truncation_error_bound: 0.0,
            panels: Vec::new(),
        });
    }
    let integral = adaptive_simpson(
        |x| f(x) * m.pdf(x),
        m.support.lo,
        m.support.hi,
        rel_tol,
        DEFAULT_MAX_EVALUATIONS,
    )?;
    // sup |f| sampled at the panel nodes
    let sup_f = integral
        .panels
        .iter()
        .flat_map(|p| [p.lo, 0.5 * (p.lo + p.hi)])
        .chain([m.support.hi])
        .map(|x| f(x).abs())
        .fold(0.0, f64::max);
    let truncation_error_bound = m.tail_mass * sup_f;
    Ok(QuadratureResult {
        value: integral.value,
        abs_error_estimate: integral.abs_error_estimate + truncation_error_bound,
        evaluations: integral.evaluations,
        support_used: m.support,
        truncation_error_bound,
        panels: integral.panels,
    })
}

pub fn quadrature_q_over_k(
    q: &ScalarField,
    k: &ScalarField,
    m: &InvariantDensity,
    rel_tol: f64,
) -> Result<QuadratureResult> {
    let Interval { lo, hi } = m.support;
    for x in [lo, 0.5 * (lo + hi), hi] {
        if k.eval(x) == 0.0 {
            return Err(Error::Singularity { x });
        }
    }
    integrate_against(m, |x| q.eval(x) / k.eval(x), rel_tol)
}
