//! Pathwise verification of the mean-value representation
//!
//! ```text
//! ∫ₜᵀ q(X_s)e^{−∫ₜˢK} ds = (q/K)(X_ξ)·(1 − e^{−∫ₜᵀK})
//! ```
//!
//! where `ξ` is the first time in `(t, T)` at which `K(X_s)/q(X_s)` equals
//! the boundary ratio `r_T(t) = (1 − e^{−∫ₜᵀK}) / ∫ₜᵀ q e^{−∫ₜˢK} ds`.
//!
//! Between grid points the path is its linear interpolant. The first level
//! crossing is located by a sign change of `ρ(s) − r` on the grid and
//! refined by linear interpolation of `ρ`; a discrete path can miss the
//! continuum crossing, which the record reports via `crossing_found`.

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::functional::{cumulative_k, window_functional, window_values, FunctionalSeries};
use crate::sde::SamplePath;

/// Relative tolerance under which `ρ(s) − r` counts as zero.
pub const RATIO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeChange {
    pub xi: f64,
    /// Grid cell `(lo, lo + 1)` containing `xi`.
    pub bracket: (usize, usize),
    pub crossing_found: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvtRecord {
    pub t_index: usize,
    pub horizon_index: usize,
    pub t: f64,
    pub horizon: f64,
    pub r: f64,
    pub xi: f64,
    pub xi_bracket: (usize, usize),
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub crossing_found: bool,
}

impl MvtRecord {
    pub fn relative_residual(&self) -> f64 {
        self.residual.abs() / self.lhs.abs()
    }
}

/// A path with its fields and cumulative K, shared by many windows.
#[derive(Debug, Clone)]
pub struct MvtVerifier<'a> {
    path: &'a SamplePath,
    q: ScalarField,
    k: ScalarField,
    cumulative_k: Vec<f64>,
}

impl<'a> MvtVerifier<'a> {
    pub fn new(path: &'a SamplePath, q: ScalarField, k: ScalarField) -> Self {
        let cumulative_k = cumulative_k(path, &k);
        Self {
            path,
            q,
            k,
            cumulative_k,
        }
    }

    fn check_window(&self, t_index: usize, horizon_index: usize) -> Result<()> {
        if t_index >= horizon_index || horizon_index > self.path.n_steps() {
            return Err(Error::config(
                "window",
                format!(
                    "need t_index < T_index <= {}, got ({t_index}, {horizon_index})",
                    self.path.n_steps()
                ),
            ));
        }
        Ok(())
    }

    /// `1 − e^{−(A[T] − A[t])}`
    fn decay_gain(&self, t_index: usize, horizon_index: usize) -> f64 {
        -(-(self.cumulative_k[horizon_index] - self.cumulative_k[t_index])).exp_m1()
    }

    fn ratio_from(&self, gain: f64, lhs: f64, t_index: usize, horizon_index: usize) -> Result<f64> {
        if lhs == 0.0 {
            return Err(Error::DegenerateRatio {
                t_index,
                horizon_index,
            });
        }
        Ok(gain / lhs)
    }

    pub fn boundary_ratio(&self, t_index: usize, horizon_index: usize) -> Result<f64> {
        self.check_window(t_index, horizon_index)?;
        let lhs = window_functional(self.path, &self.q, &self.k, t_index, horizon_index)?;
        self.ratio_from(
            self.decay_gain(t_index, horizon_index),
            lhs,
            t_index,
            horizon_index,
        )
    }

    /// The boundary ratio in its global form
    /// `(e^{−A(t)} − e^{−A(T)}) / ∫ₜᵀ q e^{−A(s)} ds`, with the same frozen
    /// cell coefficients as the recurrence. Cross-check only: it underflows
    /// once `A(T)` passes a few hundred.
    pub fn boundary_ratio_global_form(&self, t_index: usize, horizon_index: usize) -> Result<f64> {
        self.check_window(t_index, horizon_index)?;
        let a = &self.cumulative_k;
        let weight = |i: usize| (-a[i]).exp();
        if !weight(horizon_index).is_normal() {
            return Err(Error::Underflow(format!(
                "e^(-A) at index {horizon_index} with A = {}",
                a[horizon_index]
            )));
        }
        let x = &self.path.states;
        let mut denominator = 0.0;
        for i in t_index..horizon_index {
            let q_bar = 0.5 * (self.q.eval(x[i]) + self.q.eval(x[i + 1]));
            let k_bar = 0.5 * (self.k.eval(x[i]) + self.k.eval(x[i + 1]));
            if k_bar == 0.0 {
                return Err(Error::DegenerateStep { step: i });
            }
            denominator += q_bar / k_bar * (weight(i) - weight(i + 1));
        }
        let numerator = weight(t_index) - weight(horizon_index);
        self.ratio_from(numerator, denominator, t_index, horizon_index)
    }

    /// First level crossing of `ρ(s) = K(X_s)/q(X_s)` with `r` on `(t, T]`.
    pub fn time_change(&self, r: f64, t_index: usize, horizon_index: usize) -> Result<TimeChange> {
        self.check_window(t_index, horizon_index)?;
        let x = &self.path.states;
        let dt = self.path.dt;
        let tol = RATIO_TOL * r.abs().max(1.0);

        let gap = |i: usize| -> Result<f64> {
            let qx = self.q.eval(x[i]);
            if qx == 0.0 {
                return Err(Error::SingularRatio { index: i });
            }
            Ok(self.k.eval(x[i]) / qx - r)
        };

        let mut prev = gap(t_index)?;
        // the left endpoint is outside the open interval
        let mut prev_usable = prev.abs() > tol;
        let mut best = (f64::INFINITY, t_index + 1);
        for i in t_index + 1..=horizon_index {
            let d = gap(i)?;
            if d.abs() <= tol {
                return Ok(TimeChange {
                    xi: self.path.time(i),
                    bracket: (i - 1, i),
                    crossing_found: true,
                });
            }
            if prev_usable && (prev < 0.0) != (d < 0.0) {
                let frac = prev / (prev - d);
                return Ok(TimeChange {
                    xi: self.path.time(i - 1) + frac * dt,
                    bracket: (i - 1, i),
                    crossing_found: true,
                });
            }
            if d.abs() < best.0 {
                best = (d.abs(), i);
            }
            prev = d;
            prev_usable = true;
        }
        let i = best.1;
        Ok(TimeChange {
            xi: self.path.time(i),
            bracket: (i - 1, i),
            crossing_found: false,
        })
    }

    pub fn identity_check(&self, t_index: usize, horizon_index: usize) -> Result<MvtRecord> {
        self.check_window(t_index, horizon_index)?;
        let lhs = window_functional(self.path, &self.q, &self.k, t_index, horizon_index)?;
        let gain = self.decay_gain(t_index, horizon_index);
        let r = self.ratio_from(gain, lhs, t_index, horizon_index)?;
        let change = self.time_change(r, t_index, horizon_index)?;
        let x_xi = self.path.state_at(change.xi);
        let rhs = self.q.eval(x_xi) / self.k.eval(x_xi) * gain;
        Ok(MvtRecord {
            t_index,
            horizon_index,
            t: self.path.time(t_index),
            horizon: self.path.time(horizon_index),
            r,
            xi: change.xi,
            xi_bracket: change.bracket,
            lhs,
            rhs,
            residual: lhs - rhs,
            crossing_found: change.crossing_found,
        })
    }

    /// `r_T(t)` at the last `n_tail` grid times before `T`, oldest first.
    pub fn terminal_ratio_limit(&self, horizon_index: usize, n_tail: usize) -> Result<Vec<f64>> {
        if n_tail == 0 || n_tail >= horizon_index || horizon_index > self.path.n_steps() {
            return Err(Error::config(
                "n_tail",
                format!("need 0 < n_tail < T_index, got {n_tail} and {horizon_index}"),
            ));
        }
        let y = window_values(self.path, &self.q, &self.k, horizon_index)?;
        (horizon_index - n_tail..horizon_index)
            .map(|t| self.ratio_from(self.decay_gain(t, horizon_index), y[t], t, horizon_index))
            .collect()
    }

    /// `K(X_T)/q(X_T)`, the limit of `r_T(t)` as `t → T`.
    pub fn terminal_ratio(&self, horizon_index: usize) -> f64 {
        let x = self.path.states[horizon_index];
        self.k.eval(x) / self.q.eval(x)
    }
}

pub fn boundary_ratio(
    series: &FunctionalSeries,
    path: &SamplePath,
    q: &ScalarField,
    k: &ScalarField,
    t_index: usize,
    horizon_index: usize,
) -> Result<f64> {
    let verifier = MvtVerifier {
        path,
        q: *q,
        k: *k,
        cumulative_k: series.cumulative_k.clone(),
    };
    verifier.boundary_ratio(t_index, horizon_index)
}

pub fn time_change(
    path: &SamplePath,
    q: &ScalarField,
    k: &ScalarField,
    r: f64,
    t_index: usize,
    horizon_index: usize,
) -> Result<TimeChange> {
    MvtVerifier::new(path, *q, *k).time_change(r, t_index, horizon_index)
}

pub fn mvt_identity_check(
    path: &SamplePath,
    q: &ScalarField,
    k: &ScalarField,
    t_index: usize,
    horizon_index: usize,
) -> Result<MvtRecord> {
    MvtVerifier::new(path, *q, *k).identity_check(t_index, horizon_index)
}

pub fn terminal_ratio_limit(
    path: &SamplePath,
    q: &ScalarField,
    k: &ScalarField,
    horizon_index: usize,
    n_tail: usize,
) -> Result<Vec<f64>> {
    MvtVerifier::new(path, *q, *k).terminal_ratio_limit(horizon_index, n_tail)
}
