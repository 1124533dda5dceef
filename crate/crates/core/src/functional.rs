//! The exponential functional `e_K(t) = ∫ₜᵀ q(X_s) exp(−∫ₜˢ K(X_τ)dτ) ds`
//! along a sample path, and its running time average.
//!
//! On each grid cell the coefficients are frozen at their endpoint averages
//! `q̄ᵢ`, `K̄ᵢ`. The functional then satisfies `Y′ = K̄ᵢY − q̄ᵢ` exactly on the
//! cell, which gives the backward recurrence
//!
//! ```text
//! Y[i] = e^{−ΔAᵢ}·Y[i+1] + (1 − e^{−ΔAᵢ})·q̄ᵢ/K̄ᵢ,   ΔAᵢ = K̄ᵢ·dt
//! ```
//!
//! evaluated as `Y[i+1] + gᵢ·(q̄ᵢ/K̄ᵢ − Y[i+1])` with `gᵢ = −expm1(−ΔAᵢ)`.
//! Only per-step exponents appear, so nothing underflows however large
//! `A(T)` grows, and the fixed point `q̄/K̄` is reproduced without drift.
//! The time average integrates the same per-cell solution exactly.

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::sde::SamplePath;

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSeries {
    pub master_seed: u64,
    pub path_index: u64,
    pub dt: f64,
    /// `A(tᵢ) = ∫₀^{tᵢ} K(X_τ)dτ` by the trapezoid rule.
    pub cumulative_k: Vec<f64>,
    /// `Y[i] = e_K(tᵢ)` for the horizon `T = t_n`.
    pub values: Vec<f64>,
    /// `ebar[j] = (1/tⱼ)∫₀^{tⱼ} Y(t)dt`, with `ebar[0] = Y[0]`.
    pub ebar: Vec<f64>,
    /// Largest per-step exponent `ΔAᵢ` met by the recurrence.
    pub max_step_exponent: f64,
    pub warnings: Vec<String>,
}

impl FunctionalSeries {
    pub fn n_steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// True when every stored quantity is finite and the smallest per-step
    /// decay factor `e^{−ΔAᵢ}` is still a normal float.
    pub fn is_numerically_sound(&self) -> bool {
        self.cumulative_k.iter().all(|v| v.is_finite())
            && self.values.iter().all(|v| v.is_finite())
            && self.ebar.iter().all(|v| v.is_finite())
            && (-self.max_step_exponent).exp().is_normal()
    }
}

pub fn cumulative_k(path: &SamplePath, k: &ScalarField) -> Vec<f64> {
    let mut out = Vec::with_capacity(path.states.len());
    let mut acc = 0.0;
    let mut k_prev = k.eval(path.states[0]);
    out.push(0.0);
    for &x in &path.states[1..] {
        let k_next = k.eval(x);
        acc += path.dt * 0.5 * (k_prev + k_next);
        out.push(acc);
        k_prev = k_next;
    }
    out
}

/// Frozen coefficients of one cell.
#[derive(Debug, Clone, Copy)]
struct Cell {
    /// `1 − e^{−ΔA}`
    gain: f64,
    /// `ΔA = K̄·dt`
    exponent: f64,
    /// `q̄/K̄`
    ratio: f64,
}

impl Cell {
    fn new(path: &SamplePath, q: &ScalarField, k: &ScalarField, i: usize) -> Result<Cell> {
        let (x0, x1) = (path.states[i], path.states[i + 1]);
        let k_bar = 0.5 * (k.eval(x0) + k.eval(x1));
        if k_bar == 0.0 {
            return Err(Error::DegenerateStep { step: i });
        }
        let q_bar = 0.5 * (q.eval(x0) + q.eval(x1));
        let exponent = k_bar * path.dt;
        Ok(Cell {
            gain: -(-exponent).exp_m1(),
            exponent,
            ratio: q_bar / k_bar,
        })
    }

    fn step(&self, next: f64) -> f64 {
        next + self.gain * (self.ratio - next)
    }

    /// `∫` of the per-cell solution over the cell, given its right value.
    fn integral(&self, next: f64, dt: f64) -> f64 {
        // φ₁(ΔA) = (1 − e^{−ΔA})/ΔA
        let phi = if self.exponent.abs() < 1e-300 {
            1.0
        } else {
            self.gain / self.exponent
        };
        dt * (self.ratio + (next - self.ratio) * phi)
    }
}

/// `e_K` over the window ending at `horizon_index`: returns the values at
/// grid indices `0..=horizon_index`, computed by one backward sweep.
pub fn window_values(
    path: &SamplePath,
    q: &ScalarField,
    k: &ScalarField,
    horizon_index: usize,
) -> Result<Vec<f64>> {
    assert!(horizon_index <= path.n_steps());
    let mut y = vec![0.0; horizon_index + 1];
    for i in (0..horizon_index).rev() {
        y[i] = Cell::new(path, q, k, i)?.step(y[i + 1]);
    }
    Ok(y)
}

/// `∫ₜᵀ q e^{−∫ₜˢK} ds` for the window `[t_index, horizon_index]`.
pub fn window_functional(
    path: &SamplePath,
    q: &ScalarField,
    k: &ScalarField,
    t_index: usize,
    horizon_index: usize,
) -> Result<f64> {
    assert!(t_index <= horizon_index && horizon_index <= path.n_steps());
    let mut y = 0.0;
    for i in (t_index..horizon_index).rev() {
        y = Cell::new(path, q, k, i)?.step(y);
    }
    Ok(y)
}

pub fn functional_series(
    path: &SamplePath,
    q: &ScalarField,
    k: &ScalarField,
) -> Result<FunctionalSeries> {
    let n = path.n_steps();
    let mut warnings = Vec::new();
    if let Some(i) = path.states.iter().position(|&x| !(k.eval(x) > 0.0)) {
        warnings.push(format!(
            "K is not positive along the path (first at index {i}, x = {})",
            path.states[i]
        ));
    }

    let mut values = vec![0.0; n + 1];
    let mut cell_integrals = vec![0.0; n];
    let mut max_step_exponent = f64::NEG_INFINITY;
    for i in (0..n).rev() {
        let cell = Cell::new(path, q, k, i)?;
        max_step_exponent = max_step_exponent.max(cell.exponent);
        values[i] = cell.step(values[i + 1]);
        cell_integrals[i] = cell.integral(values[i + 1], path.dt);
        debug_assert!(values[i].is_finite() && cell_integrals[i].is_finite());
    }

    let ebar = running_average(path.dt, values[0], &cell_integrals);
    Ok(FunctionalSeries {
        master_seed: path.master_seed,
        path_index: path.path_index,
        dt: path.dt,
        cumulative_k: cumulative_k(path, k),
        values,
        ebar,
        max_step_exponent,
        warnings,
    })
}

/// `out[j] = (Σ_{i<j} cell_integrals[i]) / (j·dt)`, `out[0] = first`.
pub(crate) fn running_average(dt: f64, first: f64, cell_integrals: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(cell_integrals.len() + 1);
    out.push(first);
    let mut acc = 0.0;
    for (j, c) in cell_integrals.iter().enumerate() {
        acc += c;
        out.push(acc / ((j + 1) as f64 * dt));
    }
    out
}

/// Direct trapezoid quadrature of `e_K(tᵢ)`, O(n) per index. The weight is
/// formed from exponent differences `A[s] − A[i]`, never from `e^{−A[s]}`.
pub fn functional_direct(path: &SamplePath, q: &ScalarField, k: &ScalarField, i: usize) -> f64 {
    let n = path.n_steps();
    assert!(i <= n);
    let a = cumulative_k(path, k);
    let integrand = |s: usize| q.eval(path.states[s]) * (-(a[s] - a[i])).exp();
    let mut sum = 0.0;
    for s in i..n {
        sum += 0.5 * (integrand(s) + integrand(s + 1));
    }
    sum * path.dt
}

/// Running time average at grid index `j`. By convention `j = 0` returns
/// `Y[0]`.
pub fn time_average(series: &FunctionalSeries, j: usize) -> f64 {
    series.ebar[j]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(s: &str) -> ScalarField {
        s.parse().unwrap()
    }

    fn frozen(x: f64, dt: f64, n: usize) -> SamplePath {
        SamplePath {
            dt,
            states: vec![x; n + 1],
            master_seed: 0,
            path_index: 0,
        }
    }

    fn ulps(a: f64, b: f64) -> u64 {
        (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
    }

    #[test]
    fn cumulative_k_constants() {
        let a = cumulative_k(&frozen(0.0, 0.01, 100), &field("const(2)"));
        assert_eq!(a[0], 0.0);
        assert!((a[100] - 2.0).abs() < 1e-13);
        let a = cumulative_k(&frozen(0.0, 0.01, 100), &field("const(0.5)"));
        assert!((a[100] - 0.5).abs() < 1e-13);
        let a = cumulative_k(&frozen(0.0, 0.01, 100), &field("offset_sin(2,1)"));
        assert!((a[100] - 2.0).abs() < 1e-13);
    }

    #[test]
    fn constant_coefficients_match_closed_form() {
        let (c, k) = (1.0, 2.0);
        let path = frozen(0.0, 0.01, 100);
        let s = functional_series(&path, &field("const(1)"), &field("const(2)")).unwrap();
        assert_eq!(s.values[100], 0.0);
        assert!((s.values[0] - 0.4323323584).abs() < 1e-10);
        assert!((s.ebar[100] - 0.2838338208).abs() < 1e-10);
        for i in 0..=100 {
            let closed = c / k * -(-k * (100 - i) as f64 * 0.01).exp_m1();
            assert!(
                ulps(s.values[i], closed) <= 10,
                "i={i}: {} vs {closed}",
                s.values[i]
            );
        }
    }

    #[test]
    fn zero_source_gives_zero() {
        let path = frozen(0.3, 0.05, 40);
        let s = functional_series(&path, &field("const(0)"), &field("offset_sin(2,1)")).unwrap();
        assert!(s.values.iter().all(|&v| v == 0.0));
        assert!(s.ebar.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn long_horizon_average_approaches_ratio() {
        let s = functional_series(
            &frozen(0.0, 0.01, 10_000),
            &field("const(1)"),
            &field("const(2)"),
        )
        .unwrap();
        let closed = 0.5 * (1.0 - (1.0 - (-200.0f64).exp()) / 200.0);
        assert!((s.ebar[10_000] - closed).abs() <= 1e-12 * closed);
        assert!((s.ebar[10_000] - 0.5).abs() < 0.01 * 0.5);
    }

    #[test]
    fn direct_oracle_examples() {
        let path = frozen(0.0, 0.001, 1000);
        let (q, k) = (field("const(1)"), field("const(2)"));
        assert_eq!(functional_direct(&path, &q, &k, 1000), 0.0);
        let d = functional_direct(&path, &q, &k, 0);
        // trapezoid error k²h²/12 relative
        assert!((d - 0.4323323584).abs() < 1e-6, "{d}");
    }

    #[test]
    fn direct_oracle_proportional_fields() {
        // integrand is d/ds of −e^{−(A(s)−A(t))}
        let path = SamplePath {
            dt: 0.001,
            states: (0..=20_000).map(|i| (i as f64 * 0.001).sin()).collect(),
            master_seed: 0,
            path_index: 0,
        };
        let k = field("offset_sin(2,1)");
        let a = cumulative_k(&path, &k);
        let d = functional_direct(&path, &k, &k, 0);
        assert!((d - (1.0 - (-a[20_000]).exp())).abs() < 1e-6, "{d}");
    }

    #[test]
    fn degenerate_step() {
        let path = frozen(-std::f64::consts::FRAC_PI_2, 0.1, 3);
        let err =
            functional_series(&path, &field("const(1)"), &field("offset_sin(1,1)")).unwrap_err();
        assert!(matches!(err, Error::DegenerateStep { step: 2 }));
    }

    #[test]
    fn nonpositive_k_is_warned() {
        let path = frozen(0.0, 0.1, 3);
        let s = functional_series(&path, &field("const(1)"), &field("const(-1)")).unwrap();
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn average_of_constant_cells() {
        let avg = running_average(0.1, 3.0, &[0.3; 10]);
        assert_eq!(avg[0], 3.0);
        for v in &avg[1..] {
            assert!((v - 3.0).abs() < 1e-14);
        }
        let s = functional_series(&frozen(0.0, 0.1, 5), &field("const(1)"), &field("const(2)"))
            .unwrap();
        assert_eq!(time_average(&s, 0), s.values[0]);
    }

    #[test]
    fn window_matches_series() {
        let path = SamplePath {
            dt: 0.01,
            states: (0..=300).map(|i| (i as f64 * 0.05).cos()).collect(),
            master_seed: 0,
            path_index: 0,
        };
        let (q, k) = (field("rational1(1,1)"), field("offset_sin(2,1)"));
        let s = functional_series(&path, &q, &k).unwrap();
        let w = window_values(&path, &q, &k, 300).unwrap();
        assert_eq!(w, s.values);
        assert_eq!(
            window_functional(&path, &q, &k, 17, 300).unwrap(),
            s.values[17]
        );
        let w = window_values(&path, &q, &k, 150).unwrap();
        assert_eq!(w[150], 0.0);
        assert_eq!(window_functional(&path, &q, &k, 40, 150).unwrap(), w[40]);
    }
}
