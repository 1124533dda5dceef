//! Where the time average actually converges. Averaging `e_K(t)` over `t`
//! samples the future-path functional `u(X_t)`, so the limit is `∫ u dm`
//! with `u` the Feynman-Kac resolvent. It coincides with `∫ (q/K) dm` only
//! when the path is effectively frozen over the decay time `1/K`.

mod common;

use common::{config, offset_sin_gaussian_mean, ou_resolvent_mean};
use fkavg::harness::run_limit;

fn oracle(theta: f64, sigma: f64) -> f64 {
    ou_resolvent_mean(
        theta,
        0.0,
        sigma,
        |_| 1.0,
        |x| 2.0 + x.sin(),
        12.0 * sigma / (2.0 * theta).sqrt(),
        40_001,
    )
}

#[test]
fn resolvent_oracle_limits() {
    // fast mixing: K averages out before the exponential decays
    let fast = oracle(200.0, 20.0);
    assert!((fast - 0.5).abs() < 5e-3, "{fast}");
    // slow mixing: the path is frozen and the ratio average is recovered
    let slow = oracle(1e-3, 1e-3f64.sqrt() * std::f64::consts::SQRT_2);
    let ratio_mean = offset_sin_gaussian_mean(2.0, 1.0);
    assert!((slow - ratio_mean).abs() < 5e-3, "{slow} vs {ratio_mean}");
}

#[test]
fn time_average_converges_to_resolvent_mean() {
    let cfg = config(
        "limit --model ou(theta=1,mu=0,sigma=1.4142135623730951) --q const(1) --K offset_sin(a=2,b=1) \
         --T 1000 --dt 0.01 --paths 32 --seed 7",
    );
    let run = run_limit(&cfg).unwrap();
    let limit = oracle(1.0, std::f64::consts::SQRT_2);
    let gap = (run.row.ebar_mean - limit).abs();
    // Euler bias in the stationary variance is about dt/2 relative
    let band = 3.0 * run.row.ebar_stderr + 2e-3;
    eprintln!(
        "ebar {:.5} ± {:.5}, resolvent limit {limit:.5}, ratio average {:.5}",
        run.row.ebar_mean, run.row.ebar_stderr, run.row.target
    );
    assert!(gap <= band, "gap {gap} > {band}");
    assert!((run.row.target - limit).abs() > 10.0 * run.row.ebar_stderr);
}
