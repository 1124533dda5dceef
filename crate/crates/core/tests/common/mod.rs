#![allow(dead_code)]

use fkavg::harness::{parse_config, RunConfig};
use fkavg::{ScalarField, SdeModel};

pub fn field(s: &str) -> ScalarField {
    s.parse().unwrap()
}

pub fn model(s: &str) -> SdeModel {
    s.parse().unwrap()
}

pub fn config(args: &str) -> RunConfig {
    let argv = std::iter::once("fkavg").chain(args.split_whitespace());
    parse_config(argv).unwrap()
}

/// `E[1/(a + b sin X)]` for `X ~ N(0, 1)` from the Fourier series
/// `1/(a + b cos θ) = (1 + 2Σ (−ρ)ⁿ cos nθ)/√(a² − b²)`,
/// `ρ = (a − √(a² − b²))/b`, with `θ = X − π/2` and
/// `E[cos n(X − π/2)] = cos(nπ/2)·e^{−n²/2}`.
pub fn offset_sin_gaussian_mean(a: f64, b: f64) -> f64 {
    let s = (a * a - b * b).sqrt();
    let rho = (a - s) / b;
    let mut sum = 1.0;
    for m in 1..40 {
        let n = 2.0 * m as f64;
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        sum += 2.0 * sign * rho.powf(n) * (-0.5 * n * n).exp();
    }
    sum / s
}

/// Composite midpoint rule with `n` cells.
pub fn midpoint<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    (0..n).map(|i| f(lo + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `∫ u dm` for OU(θ, μ, σ), where `u(x) = E_x ∫₀^∞ q(X_s) e^{−∫₀ˢ K(X_τ)dτ} ds`
/// solves `(σ²/2)u″ − θ(x − μ)u′ − K u + q = 0`. Central differences on
/// `[μ − L, μ + L]` with `u = 0` outside, solved by the Thomas algorithm.
pub fn ou_resolvent_mean<Q, K>(
    theta: f64,
    mu: f64,
    sigma: f64,
    q: Q,
    k: K,
    half_width: f64,
    n: usize,
) -> f64
where
    Q: Fn(f64) -> f64,
    K: Fn(f64) -> f64,
{
    let h = 2.0 * half_width / (n - 1) as f64;
    let x: Vec<f64> = (0..n).map(|i| mu - half_width + i as f64 * h).collect();
    let d = 0.5 * sigma * sigma / (h * h);
    let lower: Vec<f64> = x
        .iter()
        .map(|&xi| d + theta * (xi - mu) / (2.0 * h))
        .collect();
    let upper: Vec<f64> = x
        .iter()
        .map(|&xi| d - theta * (xi - mu) / (2.0 * h))
        .collect();
    let mut diag: Vec<f64> = x.iter().map(|&xi| -2.0 * d - k(xi)).collect();
    let mut rhs: Vec<f64> = x.iter().map(|&xi| -q(xi)).collect();
    for i in 1..n {
        let w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut u = vec![0.0; n];
    u[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        u[i] = (rhs[i] - upper[i] * u[i + 1]) / diag[i];
    }
    let var = sigma * sigma / (2.0 * theta);
    let pdf = |xi: f64| {
        (-(xi - mu) * (xi - mu) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    };
    let mut sum = 0.0;
    for i in 0..n - 1 {
        sum += 0.5 * h * (u[i] * pdf(x[i]) + u[i + 1] * pdf(x[i + 1]));
    }
    sum
}
