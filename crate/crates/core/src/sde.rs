//! Scalar diffusions `dX = drift(X) dt + σ dB` and their Euler–Maruyama
//! sample paths.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grammar::{fmt_value, parse_call};
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SdeModel {
    /// Ornstein–Uhlenbeck: drift `−θ(x − μ)`.
    Ou { theta: f64, mu: f64, sigma: f64 },
    /// Gradient flow in `U(x) = a·x⁴/4 − b·x²/2`: drift `−(a·x³ − b·x)`.
    DoubleWell { a: f64, b: f64, sigma: f64 },
    /// Frozen at `x0`: no drift, no noise.
    ConstantState { x0: f64 },
}

impl SdeModel {
    pub fn drift(&self, x: f64) -> f64 {
        match *self {
            SdeModel::Ou { theta, mu, .. } => -theta * (x - mu),
            SdeModel::DoubleWell { a, b, .. } => -(a * x * x * x - b * x),
            SdeModel::ConstantState { .. } => 0.0,
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            SdeModel::Ou { sigma, .. } | SdeModel::DoubleWell { sigma, .. } => sigma,
            SdeModel::ConstantState { .. } => 0.0,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SdeModel::Ou { .. } => "ou",
            SdeModel::DoubleWell { .. } => "double_well",
            SdeModel::ConstantState { .. } => "constant_state",
        }
    }
}

impl FromStr for SdeModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let call = parse_call(s)?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 {
                Ok(v)
            } else {
                Err(Error::parse(name, "must be strictly positive"))
            }
        };
        // sigma = 0 is accepted: it gives the deterministic drift ODE.
        let nonnegative = |name: &str, v: f64| {
            if v >= 0.0 {
                Ok(v)
            } else {
                Err(Error::parse(name, "must be nonnegative"))
            }
        };
        match call.kind.as_str() {
            "ou" => {
                let v = call.bind(&["theta", "mu", "sigma"])?;
                Ok(SdeModel::Ou {
                    theta: positive("theta", v[0])?,
                    mu: v[1],
                    sigma: nonnegative("sigma", v[2])?,
                })
            }
            "double_well" => {
                let v = call.bind(&["a", "b", "sigma"])?;
                Ok(SdeModel::DoubleWell {
                    a: positive("a", v[0])?,
                    b: positive("b", v[1])?,
                    sigma: positive("sigma", v[2])?,
                })
            }
            "constant_state" => {
                let v = call.bind(&["x0"])?;
                Ok(SdeModel::ConstantState { x0: v[0] })
            }
            other => Err(Error::parse(other, "unknown model kind")),
        }
    }
}

impl fmt::Display for SdeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            SdeModel::Ou { theta, mu, sigma } => write!(
                f,
                "ou(theta={},mu={},sigma={})",
                fmt_value(theta),
                fmt_value(mu),
                fmt_value(sigma)
            ),
            SdeModel::DoubleWell { a, b, sigma } => write!(
                f,
                "double_well(a={},b={},sigma={})",
                fmt_value(a),
                fmt_value(b),
                fmt_value(sigma)
            ),
            SdeModel::ConstantState { x0 } => write!(f, "constant_state(x0={})", fmt_value(x0)),
        }
    }
}

/// A realization on the uniform grid `t_i = i·dt`, `i = 0..=n_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub dt: f64,
    pub states: Vec<f64>,
    pub master_seed: u64,
    pub path_index: u64,
}

impl SamplePath {
    pub fn n_steps(&self) -> usize {
        self.states.len() - 1
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.time(self.n_steps())
    }

    /// The first `n_steps` steps of this path.
    pub fn prefix(&self, n_steps: usize) -> SamplePath {
        assert!(n_steps >= 1 && n_steps <= self.n_steps());
        SamplePath {
            dt: self.dt,
            states: self.states[..=n_steps].to_vec(),
            master_seed: self.master_seed,
            path_index: self.path_index,
        }
    }

    /// Piecewise-linear interpolant of the states at time `t ∈ [0, horizon]`.
    pub fn state_at(&self, t: f64) -> f64 {
        let n = self.n_steps();
        let u = (t / self.dt).clamp(0.0, n as f64);
        let i = (u.floor() as usize).min(n - 1);
        let frac = u - i as f64;
        if frac == 0.0 {
            return self.states[i];
        }
        self.states[i] + frac * (self.states[i + 1] - self.states[i])
    }
}

fn check_step(dt: f64, n_steps: usize) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config("dt", "time step must be positive and finite"));
    }
    if n_steps == 0 {
        return Err(Error::config("n_steps", "need at least one step"));
    }
    Ok(())
}

/// Euler–Maruyama driven by the given standard normals, one per step:
/// `x[i+1] = x[i] + drift(x[i])·dt + σ·√dt·z[i]`.
pub fn path_from_normals(
    model: &SdeModel,
    x0: f64,
    dt: f64,
    normals: &[f64],
    master_seed: u64,
    path_index: u64,
) -> Result<SamplePath> {
    check_step(dt, normals.len())?;
    let noise = model.sigma() * dt.sqrt();
    let mut states = Vec::with_capacity(normals.len() + 1);
    states.push(x0);
    let mut x = x0;
    for (i, z) in normals.iter().enumerate() {
        x = x + model.drift(x) * dt + noise * z;
        if !x.is_finite() {
            return Err(Error::Diverged {
                path_index,
                step: i + 1,
            });
        }
        states.push(x);
    }
    Ok(SamplePath {
        dt,
        states,
        master_seed,
        path_index,
    })
}

/// Merges consecutive pairs of fine-grid normals into normals for a grid of
/// twice the step, so that both grids see the same Brownian motion:
/// `σ√(2h)·(z₁+z₂)/√2 = σ√h·z₁ + σ√h·z₂`.
pub fn coarsen_normals(fine: &[f64]) -> Vec<f64> {
    fine.chunks_exact(2)
        .map(|p| (p[0] + p[1]) * std::f64::consts::FRAC_1_SQRT_2)
        .collect()
}

/// Splits each increment of a grid into two equal halves on the grid of half
/// the step, i.e. linear interpolation of the Brownian motion at midpoints.
/// No new randomness enters, so both grids are driven by one signal, and
/// `coarsen_normals(&refine_normals(z)) == z` up to rounding.
pub fn refine_normals(coarse: &[f64]) -> Vec<f64> {
    coarse
        .iter()
        .flat_map(|z| {
            let half = z * std::f64::consts::FRAC_1_SQRT_2;
            [half, half]
        })
        .collect()
}

pub fn path_normals(master_seed: u64, path_index: u64, n_steps: usize) -> Vec<f64> {
    let mut rng = rng::stream(master_seed, path_index, Purpose::Increments);
    rng::standard_normals(&mut rng, n_steps)
}

pub fn simulate_path(
    model: &SdeModel,
    x0: f64,
    dt: f64,
    n_steps: usize,
    master_seed: u64,
    path_index: u64,
) -> Result<SamplePath> {
    check_step(dt, n_steps)?;
    let normals = path_normals(master_seed, path_index, n_steps);
    path_from_normals(model, x0, dt, &normals, master_seed, path_index)
}

/// Paths `0..n_paths`, generated in parallel on the current rayon pool. The
/// result does not depend on the pool size.
pub fn simulate_ensemble(
    model: &SdeModel,
    x0: f64,
    dt: f64,
    n_steps: usize,
    master_seed: u64,
    n_paths: usize,
) -> Result<Vec<SamplePath>> {
    if n_paths == 0 {
        return Err(Error::config("paths", "need at least one path"));
    }
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| simulate_path(model, x0, dt, n_steps, master_seed, i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(s: &str) -> SdeModel {
        s.parse().unwrap()
    }

    #[test]
    fn parse_and_display() {
        let m = model("ou(theta=1,mu=0,sigma=1.25)");
        assert_eq!(
            m,
            SdeModel::Ou {
                theta: 1.0,
                mu: 0.0,
                sigma: 1.25
            }
        );
        assert_eq!(m.to_string().parse::<SdeModel>().unwrap(), m);
        assert_eq!(
            model("double_well(a=1,b=1,sigma=1)").to_string(),
            "double_well(a=1,b=1,sigma=1)"
        );
        assert!(matches!(
            "ou(theta=0,mu=0,sigma=1)".parse::<SdeModel>(),
            Err(Error::Parse { token, .. }) if token == "theta"
        ));
        assert!(matches!(
            "brownian(sigma=1)".parse::<SdeModel>(),
            Err(Error::Parse { token, .. }) if token == "brownian"
        ));
    }

    #[test]
    fn drifts() {
        assert_eq!(model("ou(theta=2,mu=1,sigma=1)").drift(3.0), -4.0);
        assert_eq!(model("double_well(a=1,b=1,sigma=1)").drift(2.0), -6.0);
        assert_eq!(model("double_well(a=1,b=1,sigma=1)").drift(1.0), 0.0);
    }

    #[test]
    fn constant_state_is_frozen() {
        let p = simulate_path(&model("constant_state(x0=1)"), 1.0, 0.01, 100, 5, 0).unwrap();
        assert_eq!(p.states.len(), 101);
        assert!(p.states.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn deterministic_ou_decays_like_exponential() {
        let dt = 1e-3;
        let n = 3000;
        let p = simulate_path(&model("ou(theta=1,mu=0,sigma=0)"), 2.0, dt, n, 0, 0).unwrap();
        let max_err = (0..=n)
            .map(|i| (p.states[i] - 2.0 * (-p.time(i)).exp()).abs())
            .fold(0.0, f64::max);
        // forward Euler global error ≤ x0·t·e^{-t}·dt/2 ≤ dt/e
        assert!(max_err <= dt, "{max_err}");
    }

    #[test]
    fn ou_stationary_variance() {
        let dt = 0.01;
        let n = 50_000;
        let p = simulate_path(
            &model("ou(theta=1,mu=0,sigma=1.4142135623730951)"),
            0.0,
            dt,
            n,
            11,
            0,
        )
        .unwrap();
        let tail = &p.states[n / 2..];
        let m = tail.iter().sum::<f64>() / tail.len() as f64;
        let var = tail.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (tail.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.1, "{var}");
    }

    #[test]
    fn divergence_names_the_step() {
        let err =
            simulate_path(&model("double_well(a=1,b=1,sigma=1)"), 1e3, 1.0, 10, 0, 7).unwrap_err();
        match err {
            Error::Diverged { path_index, step } => {
                assert_eq!(path_index, 7);
                assert!((1..=10).contains(&step));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_grid_is_rejected() {
        let m = model("constant_state(x0=0)");
        assert!(simulate_path(&m, 0.0, 0.0, 10, 0, 0).is_err());
        assert!(simulate_path(&m, 0.0, 0.1, 0, 0, 0).is_err());
        assert!(simulate_ensemble(&m, 0.0, 0.1, 10, 0, 0).is_err());
    }

    #[test]
    fn singleton_ensemble_matches_path() {
        let m = model("ou(theta=1,mu=0,sigma=1)");
        let e = simulate_ensemble(&m, 0.5, 0.01, 50, 9, 1).unwrap();
        assert_eq!(e, vec![simulate_path(&m, 0.5, 0.01, 50, 9, 0).unwrap()]);
    }

    #[test]
    fn ensemble_independent_of_thread_count() {
        let m = model("ou(theta=1,mu=0,sigma=1)");
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_ensemble(&m, 0.0, 0.01, 200, 42, 4).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(3));
        assert_eq!(one, run(8));
    }

    #[test]
    fn distinct_path_indices_differ_at_step_one() {
        let m = model("ou(theta=1,mu=0,sigma=1)");
        let differing = (0..1000u64)
            .filter(|&i| {
                let a = simulate_path(&m, 0.0, 0.01, 1, i, 0).unwrap();
                let b = simulate_path(&m, 0.0, 0.01, 1, i, 1).unwrap();
                a.states[1] != b.states[1]
            })
            .count();
        assert_eq!(differing, 1000);
    }

    #[test]
    fn coarsened_normals_reproduce_fine_increments() {
        let fine = path_normals(1, 0, 8);
        let coarse = coarsen_normals(&fine);
        assert_eq!(coarse.len(), 4);
        // Brownian endpoints must agree on both grids
        let h: f64 = 0.01;
        let fine_sum: f64 = fine.iter().map(|z| h.sqrt() * z).sum();
        let coarse_sum: f64 = coarse.iter().map(|z| (2.0 * h).sqrt() * z).sum();
        assert!((fine_sum - coarse_sum).abs() < 1e-14);
    }

    #[test]
    fn refined_normals_split_each_increment() {
        let coarse = path_normals(4, 2, 16);
        let fine = refine_normals(&coarse);
        assert_eq!(fine.len(), 32);
        let h: f64 = 0.005;
        for (i, z) in coarse.iter().enumerate() {
            let dw = (2.0 * h).sqrt() * z;
            assert!((h.sqrt() * fine[2 * i] - 0.5 * dw).abs() < 1e-15);
        }
        for (a, b) in coarsen_normals(&fine).iter().zip(&coarse) {
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs());
        }
    }

    #[test]
    fn interpolation() {
        let p = SamplePath {
            dt: 0.5,
            states: vec![0.0, 1.0, 3.0],
            master_seed: 0,
            path_index: 0,
        };
        assert_eq!(p.state_at(0.0), 0.0);
        assert_eq!(p.state_at(0.25), 0.5);
        assert_eq!(p.state_at(0.75), 2.0);
        assert_eq!(p.state_at(1.0), 3.0);
        assert_eq!(p.prefix(1).states, vec![0.0, 1.0]);
    }
}
