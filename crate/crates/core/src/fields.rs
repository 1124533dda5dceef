//! Catalog of scalar fields used as the potential `K` and the source `q`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grammar::{fmt_value, parse_call};
use crate::Interval;

/// A smooth real function on the line from a fixed catalog. Every kind has a
/// closed-form derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarField {
    /// `x ↦ c`
    Const { c: f64 },
    /// `x ↦ a + b·sin(x)`
    OffsetSin { a: f64, b: f64 },
    /// `x ↦ c + d/(1+x²)`
    Rational1 { c: f64, d: f64 },
    /// `x ↦ c + d·exp(−x²/(2w²))`
    GaussBump { c: f64, d: f64, w: f64 },
}

impl ScalarField {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ScalarField::Const { c } => c,
            ScalarField::OffsetSin { a, b } => a + b * x.sin(),
            ScalarField::Rational1 { c, d } => c + d / (1.0 + x * x),
            ScalarField::GaussBump { c, d, w } => c + d * (-x * x / (2.0 * w * w)).exp(),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            ScalarField::Const { .. } => 0.0,
            ScalarField::OffsetSin { b, .. } => b * x.cos(),
            ScalarField::Rational1 { d, .. } => {
                let s = 1.0 + x * x;
                -2.0 * d * x / (s * s)
            }
            ScalarField::GaussBump { d, w, .. } => {
                let w2 = w * w;
                -d * x / w2 * (-x * x / (2.0 * w2)).exp()
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ScalarField::Const { .. } => "const",
            ScalarField::OffsetSin { .. } => "offset_sin",
            ScalarField::Rational1 { .. } => "rational1",
            ScalarField::GaussBump { .. } => "gauss_bump",
        }
    }
}

impl FromStr for ScalarField {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let call = parse_call(s)?;
        let field = match call.kind.as_str() {
            "const" => {
                let v = call.bind(&["c"])?;
                ScalarField::Const { c: v[0] }
            }
            "offset_sin" => {
                let v = call.bind(&["a", "b"])?;
                ScalarField::OffsetSin { a: v[0], b: v[1] }
            }
            "rational1" => {
                let v = call.bind(&["c", "d"])?;
                ScalarField::Rational1 { c: v[0], d: v[1] }
            }
            "gauss_bump" => {
                let v = call.bind(&["c", "d", "w"])?;
                if v[2] == 0.0 {
                    return Err(Error::parse("w", "gauss_bump width must be nonzero"));
                }
                ScalarField::GaussBump {
                    c: v[0],
                    d: v[1],
                    w: v[2],
                }
            }
            other => return Err(Error::parse(other, "unknown field kind")),
        };
        Ok(field)
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ScalarField::Const { c } => write!(f, "const(c={})", fmt_value(c)),
            ScalarField::OffsetSin { a, b } => {
                write!(f, "offset_sin(a={},b={})", fmt_value(a), fmt_value(b))
            }
            ScalarField::Rational1 { c, d } => {
                write!(f, "rational1(c={},d={})", fmt_value(c), fmt_value(d))
            }
            ScalarField::GaussBump { c, d, w } => write!(
                f,
                "gauss_bump(c={},d={},w={})",
                fmt_value(c),
                fmt_value(d),
                fmt_value(w)
            ),
        }
    }
}

/// `(q/K)′(x) = (q′K − qK′)/K²`.
pub fn eval_ratio_derivative(q: &ScalarField, k: &ScalarField, x: f64) -> Result<f64> {
    let kx = k.eval(x);
    if kx == 0.0 {
        return Err(Error::Singularity { x });
    }
    Ok((q.derivative(x) * kx - q.eval(x) * k.derivative(x)) / (kx * kx))
}

/// Default scan domain for assumption checks when no invariant density
/// supplies one.
pub const DEFAULT_SCAN_DOMAIN: Interval = Interval {
    lo: -12.0,
    hi: 12.0,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    /// Certified lower bound on K over the domain is not positive.
    KNotPositive,
    QUnbounded,
    RatioDerivativeUnbounded,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Condition::KNotPositive => "K not bounded below by a positive constant",
            Condition::QUnbounded => "q unbounded",
            Condition::RatioDerivativeUnbounded => "(q/K)' unbounded",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub condition: Condition,
    pub x: f64,
    pub value: f64,
}

/// Grid-scan summary of the hypotheses of the ergodic limit: K
/// bounded below by a positive constant, q bounded, (q/K)′ bounded.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub domain: Interval,
    pub grid_points: usize,
    /// Minimum of K over the scan grid.
    pub inf_k: f64,
    /// `inf_k − sup|K′|·h/2`: a lower bound on K between grid points.
    pub inf_k_lower_bound: f64,
    pub sup_abs_q: f64,
    pub sup_abs_ratio_deriv: f64,
    pub violations: Vec<Violation>,
}

impl AssumptionReport {
    pub fn is_satisfied(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "scan [{}, {}] with {} points: inf K = {} (lower bound {}), sup |q| = {}, sup |(q/K)'| = {}",
            self.domain.lo,
            self.domain.hi,
            self.grid_points,
            self.inf_k,
            self.inf_k_lower_bound,
            self.sup_abs_q,
            self.sup_abs_ratio_deriv
        )?;
        for v in &self.violations {
            write!(f, "; {} (x = {}, value = {})", v.condition, v.x, v.value)?;
        }
        Ok(())
    }
}

/// Scans `grid_points` uniformly spaced points of `domain`.
///
/// A grid minimum alone cannot certify positivity (`1 + sin x` never hits
/// zero exactly on a grid), so K is also bounded between grid points by its
/// sampled slope.
pub fn check_assumptions(
    q: &ScalarField,
    k: &ScalarField,
    domain: Interval,
    grid_points: usize,
) -> Result<AssumptionReport> {
    if grid_points < 2 {
        return Err(Error::config("grid_points", "need at least 2 grid points"));
    }
    if !(domain.lo < domain.hi) {
        return Err(Error::config("domain", "need x_lo < x_hi"));
    }
    let h = domain.width() / (grid_points - 1) as f64;

    let mut inf_k = f64::INFINITY;
    let mut inf_k_x = domain.lo;
    let mut sup_abs_dk = 0.0_f64;
    let mut sup_abs_q = 0.0_f64;
    let mut sup_abs_q_x = domain.lo;
    let mut sup_ratio = 0.0_f64;
    let mut sup_ratio_x = domain.lo;

    for i in 0..grid_points {
        let x = domain.lo + i as f64 * h;
        let kx = k.eval(x);
        if kx < inf_k || kx.is_nan() {
            inf_k = kx;
            inf_k_x = x;
        }
        sup_abs_dk = sup_abs_dk.max(k.derivative(x).abs());
        let aq = q.eval(x).abs();
        if !(aq <= sup_abs_q) {
            sup_abs_q = aq;
            sup_abs_q_x = x;
        }
        let rd = eval_ratio_derivative(q, k, x)
            .map(f64::abs)
            .unwrap_or(f64::INFINITY);
        if !(rd <= sup_ratio) {
            sup_ratio = rd;
            sup_ratio_x = x;
        }
    }

    let inf_k_lower_bound = inf_k - 0.5 * h * sup_abs_dk;
    let mut violations = Vec::new();
    if !(inf_k_lower_bound > 0.0) {
        violations.push(Violation {
            condition: Condition::KNotPositive,
            x: inf_k_x,
            value: inf_k,
        });
    }
    if !sup_abs_q.is_finite() {
        violations.push(Violation {
            condition: Condition::QUnbounded,
            x: sup_abs_q_x,
            value: sup_abs_q,
        });
    }
    if !sup_ratio.is_finite() {
        violations.push(Violation {
            condition: Condition::RatioDerivativeUnbounded,
            x: sup_ratio_x,
            value: sup_ratio,
        });
    }

    Ok(AssumptionReport {
        domain,
        grid_points,
        inf_k,
        inf_k_lower_bound,
        sup_abs_q,
        sup_abs_ratio_deriv: sup_ratio,
        violations,
    })
}
