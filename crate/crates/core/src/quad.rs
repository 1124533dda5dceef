//! Adaptive Simpson quadrature with Richardson error estimates.

use crate::error::{Error, Result};

/// Number of equal panels the interval is cut into before adapting.
const INITIAL_PANELS: usize = 16;

/// Halvings every initial panel gets before a panel may be accepted. The
/// `|S₂ − S₁|/15` estimate is only trustworthy once a feature is resolved;
/// at depth 0 a bump narrower than a panel can fool it by an order of
/// magnitude.
const MIN_DEPTH: u32 = 2;

/// One accepted subinterval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub lo: f64,
    pub hi: f64,
    pub estimate: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
    pub panels: Vec<Panel>,
}

struct Pending {
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

/// Integrates `f` over `[lo, hi]` until every panel's error estimate
/// `|S₂ − S₁|/15` meets its share of `rel_tol · ∫|f|`, or the evaluation
/// budget runs out.
pub fn adaptive_simpson<F>(
    f: F,
    lo: f64,
    hi: f64,
    rel_tol: f64,
    max_evaluations: usize,
) -> Result<Integral>
where
    F: Fn(f64) -> f64,
{
    assert!(lo < hi, "empty interval [{lo}, {hi}]");
    let evaluations = std::cell::Cell::new(0usize);
    let eval = |x: f64| {
        evaluations.set(evaluations.get() + 1);
        f(x)
    };

    let width = (hi - lo) / INITIAL_PANELS as f64;
    let nodes: Vec<f64> = (0..=2 * INITIAL_PANELS)
        .map(|i| {
            if i == 2 * INITIAL_PANELS {
                hi
            } else {
                lo + 0.5 * width * i as f64
            }
        })
        .collect();
    let values: Vec<f64> = nodes.iter().map(|&x| eval(x)).collect();

    let mut scale = 0.0;
    let mut stack = Vec::with_capacity(64);
    for p in (0..INITIAL_PANELS).rev() {
        let (i, j, k) = (2 * p, 2 * p + 1, 2 * p + 2);
        scale += simpson(
            nodes[i],
            nodes[k],
            values[i].abs(),
            values[j].abs(),
            values[k].abs(),
        );
        stack.push(Pending {
            a: nodes[i],
            b: nodes[k],
            fa: values[i],
            fm: values[j],
            fb: values[k],
            whole: simpson(nodes[i], nodes[k], values[i], values[j], values[k]),
            tol: 0.0,
            depth: 0,
        });
    }
    let abs_tol = rel_tol * scale;
    for p in &mut stack {
        p.tol = abs_tol / INITIAL_PANELS as f64;
    }

    let min_width = (hi - lo) * 1e-14;
    let mut value = 0.0;
    let mut error = 0.0;
    let mut panels = Vec::new();
    while let Some(p) = stack.pop() {
        let m = 0.5 * (p.a + p.b);
        let (lm, rm) = (0.5 * (p.a + m), 0.5 * (m + p.b));
        let (flm, frm) = (eval(lm), eval(rm));
        let left = simpson(p.a, m, p.fa, flm, p.fm);
        let right = simpson(m, p.b, p.fm, frm, p.fb);
        let diff = left + right - p.whole;
        let err = diff.abs() / 15.0;
        if (p.depth >= MIN_DEPTH && err <= p.tol) || (p.b - p.a) < min_width {
            let estimate = left + right + diff / 15.0;
            value += estimate;
            error += err;
            panels.push(Panel {
                lo: p.a,
                hi: p.b,
                estimate,
                error: err,
            });
            continue;
        }
        if evaluations.get() >= max_evaluations {
            let pending: f64 = stack.iter().map(|q| q.whole).sum::<f64>() + left + right;
            let pending_err: f64 = stack.iter().map(|q| q.tol).sum::<f64>() + err;
            return Err(Error::BudgetExceeded {
                evaluations: evaluations.get(),
                best_estimate: value + pending,
                error_estimate: error + pending_err,
            });
        }
        let tol = 0.5 * p.tol;
        stack.push(Pending {
            a: m,
            b: p.b,
            fa: p.fm,
            fm: frm,
            fb: p.fb,
            whole: right,
            tol,
            depth: p.depth + 1,
        });
        stack.push(Pending {
            a: p.a,
            b: m,
            fa: p.fa,
            fm: flm,
            fb: p.fm,
            whole: left,
            tol,
            depth: p.depth + 1,
        });
    }
    panels.sort_by(|x, y| x.lo.total_cmp(&y.lo));

    Ok(Integral {
        value,
        abs_error_estimate: error,
        evaluations: evaluations.get(),
        panels,
    })
}
