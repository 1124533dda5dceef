//! The experiments behind each subcommand. Every result is reduced in path
//! order, so outputs do not depend on the worker count.

use rand::Rng;
use rayon::prelude::*;

use super::config::{step_count, Command, InitialState, RunConfig};
use crate::error::{Error, Result};
use crate::fields::{check_assumptions, AssumptionReport, DEFAULT_SCAN_DOMAIN};
use crate::functional::{functional_series, FunctionalSeries};
use crate::measure::{
    invariant_density, quadrature_q_over_k, DensityKind, InvariantDensity, QuadratureResult,
    DEFAULT_REL_TOL,
};
use crate::mvt::{MvtRecord, MvtVerifier};
use crate::rng::{stream, Purpose};
use crate::sde::{path_from_normals, path_normals, refine_normals, SamplePath};
use crate::Interval;

/// Shortest window, in cells, drawn by the MVT experiment.
pub const MIN_WINDOW_CELLS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub horizon: f64,
    pub ebar_mean: f64,
    /// Sample standard deviation over `√n_paths`; zero for a single path.
    pub ebar_stderr: f64,
    pub target: f64,
    pub abs_gap: f64,
    pub n_paths: usize,
}

#[derive(Debug, Clone)]
pub struct LimitRun {
    pub row: ConvergenceRow,
    /// `ebar(T)` per path, in path order.
    pub ebar: Vec<f64>,
    pub target: QuadratureResult,
    pub report: AssumptionReport,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct ConvergeRun {
    pub rows: Vec<ConvergenceRow>,
    pub target: QuadratureResult,
    pub report: AssumptionReport,
    pub warnings: Vec<String>,
}

/// A window on which the identity could not be evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFailure {
    pub path_index: u64,
    pub t_index: usize,
    pub horizon_index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvtSummary {
    pub windows: usize,
    pub skipped: usize,
    pub max_abs_residual: f64,
    pub p95_relative_residual: f64,
    pub max_relative_residual: f64,
    pub crossing_rate: f64,
}

#[derive(Debug, Clone)]
pub struct MvtRun {
    pub records: Vec<MvtRecord>,
    pub failures: Vec<WindowFailure>,
    pub summary: MvtSummary,
}

/// The same windows on one driving signal discretized at `dt` and `dt/2`.
#[derive(Debug, Clone)]
pub struct RefinementStudy {
    pub coarse: MvtRun,
    pub fine: MvtRun,
    /// Coarse over fine 95th-percentile relative residual.
    pub p95_ratio: f64,
}

/// Runs `f` on a pool of `workers` threads, or on the global pool.
pub fn in_pool<T, F>(workers: Option<usize>, f: F) -> Result<T>
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config("--workers", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Interval on which the hypotheses are scanned before a limit run: the
/// truncated support of the invariant density, widened around a point mass.
pub fn scan_domain(density: &InvariantDensity) -> Interval {
    match density.kind {
        DensityKind::PointMass { x0 } => Interval::new(x0 - 1.0, x0 + 1.0),
        _ => density.support,
    }
}

fn initial_state(cfg: &RunConfig, density: &InvariantDensity, path_index: u64) -> Result<f64> {
    match cfg.x0 {
        InitialState::Fixed(x) => Ok(x),
        InitialState::Stationary => {
            let mut rng = stream(cfg.master_seed, path_index, Purpose::InitialState);
            density.sample(&mut rng)
        }
    }
}

fn simulate_one(
    cfg: &RunConfig,
    density: &InvariantDensity,
    n_steps: usize,
    path_index: u64,
) -> Result<SamplePath> {
    let x0 = initial_state(cfg, density, path_index)?;
    let normals = path_normals(cfg.master_seed, path_index, n_steps);
    path_from_normals(
        cfg.model()?,
        x0,
        cfg.dt,
        &normals,
        cfg.master_seed,
        path_index,
    )
}

fn per_path<T, F>(cfg: &RunConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    in_pool(cfg.workers, || {
        (0..cfg.n_paths as u64)
            .into_par_iter()
            .map(&f)
            .collect::<Result<Vec<T>>>()
    })?
}

pub fn run_simulate(cfg: &RunConfig) -> Result<Vec<SamplePath>> {
    let density = invariant_density(cfg.model()?)?;
    let n = cfg.n_steps()?;
    per_path(cfg, |i| simulate_one(cfg, &density, n, i))
}

pub fn run_functional(cfg: &RunConfig) -> Result<Vec<FunctionalSeries>> {
    let density = invariant_density(cfg.model()?)?;
    let n = cfg.n_steps()?;
    let (q, k) = (cfg.q()?, cfg.k()?);
    per_path(cfg, |i| {
        functional_series(&simulate_one(cfg, &density, n, i)?, q, k)
    })
}

/// Assumption scan, then the quadrature target.
fn preflight(
    cfg: &RunConfig,
    density: &InvariantDensity,
) -> Result<(AssumptionReport, QuadratureResult)> {
    let (q, k) = (cfg.q()?, cfg.k()?);
    let report = check_assumptions(q, k, scan_domain(density), cfg.grid_points)?;
    if !report.is_satisfied() && !cfg.allow_violations {
        return Err(Error::AssumptionViolation(report.to_string()));
    }
    let target = quadrature_q_over_k(q, k, density, DEFAULT_REL_TOL)?;
    Ok((report, target))
}

pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn row(horizon: f64, values: &[f64], target: f64) -> ConvergenceRow {
    let (ebar_mean, ebar_stderr) = mean_and_stderr(values);
    ConvergenceRow {
        horizon,
        ebar_mean,
        ebar_stderr,
        target,
        abs_gap: (ebar_mean - target).abs(),
        n_paths: values.len(),
    }
}

fn collect_warnings(series: &FunctionalSeries, out: &mut Vec<String>) {
    for w in &series.warnings {
        out.push(format!("path {}: {w}", series.path_index));
    }
}

pub fn run_limit(cfg: &RunConfig) -> Result<LimitRun> {
    let density = invariant_density(cfg.model()?)?;
    let (report, target) = preflight(cfg, &density)?;
    let n = cfg.n_steps()?;
    let (q, k) = (cfg.q()?, cfg.k()?);
    let series = per_path(cfg, |i| {
        let s = functional_series(&simulate_one(cfg, &density, n, i)?, q, k)?;
        Ok((s.ebar[n], s.warnings.clone(), s.path_index))
    })?;
    let mut warnings = Vec::new();
    let mut ebar = Vec::with_capacity(series.len());
    for (e, ws, p) in series {
        ebar.push(e);
        warnings.extend(ws.into_iter().map(|w| format!("path {p}: {w}")));
    }
    Ok(LimitRun {
        row: row(cfg.horizon, &ebar, target.value),
        ebar,
        target,
        report,
        warnings,
    })
}

/// Each path is simulated once to the longest horizon; shorter horizons use
/// its prefixes, so the ladder follows one set of trajectories.
pub fn run_converge(cfg: &RunConfig) -> Result<ConvergeRun> {
    let density = invariant_density(cfg.model()?)?;
    let (report, target) = preflight(cfg, &density)?;
    let (q, k) = (cfg.q()?, cfg.k()?);
    let steps: Vec<usize> = cfg
        .t_ladder
        .iter()
        .map(|&t| step_count(t, cfg.dt, "--T-ladder"))
        .collect::<Result<_>>()?;
    let longest = *steps.last().expect("validated non-empty ladder");
    let per = per_path(cfg, |i| {
        let path = simulate_one(cfg, &density, longest, i)?;
        let mut warnings = Vec::new();
        let mut values = Vec::with_capacity(steps.len());
        for &n in &steps {
            let s = functional_series(&path.prefix(n), q, k)?;
            collect_warnings(&s, &mut warnings);
            values.push(s.ebar[n]);
        }
        Ok((values, warnings))
    })?;
    let mut warnings = Vec::new();
    let mut by_horizon = vec![Vec::with_capacity(cfg.n_paths); steps.len()];
    for (values, ws) in per {
        for (col, v) in by_horizon.iter_mut().zip(values) {
            col.push(v);
        }
        warnings.extend(ws);
    }
    warnings.dedup();
    let rows = cfg
        .t_ladder
        .iter()
        .zip(&by_horizon)
        .map(|(&t, vals)| row(t, vals, target.value))
        .collect();
    Ok(ConvergeRun {
        rows,
        target,
        report,
        warnings,
    })
}

/// `count` windows `(t, T)` with `T − t ≥ MIN_WINDOW_CELLS`, both endpoints
/// uniform on `0..=n_steps`, by rejection.
pub fn draw_windows(
    rng: &mut impl Rng,
    n_steps: usize,
    count: usize,
) -> Result<Vec<(usize, usize)>> {
    if n_steps < MIN_WINDOW_CELLS {
        return Err(Error::config(
            "--T",
            format!("need at least {MIN_WINDOW_CELLS} steps to draw windows, got {n_steps}"),
        ));
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = rng.random_range(0..=n_steps);
        let b = rng.random_range(0..=n_steps);
        let (lo, hi) = (a.min(b), a.max(b));
        if hi - lo >= MIN_WINDOW_CELLS {
            out.push((lo, hi));
        }
    }
    Ok(out)
}

fn path_windows(cfg: &RunConfig, path_index: u64, n_steps: usize) -> Result<Vec<(usize, usize)>> {
    let mut rng = stream(cfg.master_seed, path_index, Purpose::Windows);
    draw_windows(&mut rng, n_steps, cfg.windows)
}

type WindowOutcome = std::result::Result<MvtRecord, WindowFailure>;

fn check_windows(
    cfg: &RunConfig,
    path: &SamplePath,
    windows: &[(usize, usize)],
) -> Result<Vec<WindowOutcome>> {
    let verifier = MvtVerifier::new(path, *cfg.q()?, *cfg.k()?);
    windows
        .iter()
        .map(|&(t, big_t)| match verifier.identity_check(t, big_t) {
            Ok(r) => Ok(Ok(r)),
            Err(e @ (Error::DegenerateRatio { .. } | Error::SingularRatio { .. })) => {
                Ok(Err(WindowFailure {
                    path_index: path.path_index,
                    t_index: t,
                    horizon_index: big_t,
                    reason: e.to_string(),
                }))
            }
            Err(e) => Err(e),
        })
        .collect()
}

/// Nearest-rank percentile of unsorted data.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    v[rank.min(v.len()) - 1]
}

fn summarize(records: Vec<MvtRecord>, failures: Vec<WindowFailure>) -> MvtRun {
    let rel: Vec<f64> = records.iter().map(MvtRecord::relative_residual).collect();
    let crossings = records.iter().filter(|r| r.crossing_found).count();
    let summary = MvtSummary {
        windows: records.len(),
        skipped: failures.len(),
        max_abs_residual: records.iter().map(|r| r.residual.abs()).fold(0.0, f64::max),
        p95_relative_residual: percentile(&rel, 95.0),
        max_relative_residual: rel.iter().copied().fold(0.0, f64::max),
        crossing_rate: crossings as f64 / records.len().max(1) as f64,
    };
    MvtRun {
        records,
        failures,
        summary,
    }
}

fn split(outcomes: Vec<Vec<WindowOutcome>>) -> (Vec<MvtRecord>, Vec<WindowFailure>) {
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes.into_iter().flatten() {
        match o {
            Ok(r) => records.push(r),
            Err(f) => failures.push(f),
        }
    }
    (records, failures)
}

pub fn run_mvt(cfg: &RunConfig) -> Result<MvtRun> {
    let density = invariant_density(cfg.model()?)?;
    let n = cfg.n_steps()?;
    let outcomes = per_path(cfg, |i| {
        let path = simulate_one(cfg, &density, n, i)?;
        check_windows(cfg, &path, &path_windows(cfg, i, n)?)
    })?;
    let (records, failures) = split(outcomes);
    Ok(summarize(records, failures))
}

/// Checks the same windows (in time) on the plain run's paths and on paths
/// at `dt/2` driven by the same Brownian increments, each split in two. Only
/// the discretization changes between the two runs.
pub fn run_mvt_refinement(cfg: &RunConfig) -> Result<RefinementStudy> {
    let density = invariant_density(cfg.model()?)?;
    let model = cfg.model()?;
    let n = cfg.n_steps()?;
    let outcomes = per_path(cfg, |i| {
        let x0 = initial_state(cfg, &density, i)?;
        let coarse_normals = path_normals(cfg.master_seed, i, n);
        let fine_normals = refine_normals(&coarse_normals);
        let coarse = path_from_normals(model, x0, cfg.dt, &coarse_normals, cfg.master_seed, i)?;
        let fine = path_from_normals(model, x0, 0.5 * cfg.dt, &fine_normals, cfg.master_seed, i)?;
        let windows = path_windows(cfg, i, n)?;
        let fine_windows: Vec<_> = windows.iter().map(|&(a, b)| (2 * a, 2 * b)).collect();
        Ok((
            check_windows(cfg, &coarse, &windows)?,
            check_windows(cfg, &fine, &fine_windows)?,
        ))
    })?;
    let (c, f): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    let (cr, cf) = split(c);
    let (fr, ff) = split(f);
    let coarse = summarize(cr, cf);
    let fine = summarize(fr, ff);
    let p95_ratio = coarse.summary.p95_relative_residual / fine.summary.p95_relative_residual;
    Ok(RefinementStudy {
        coarse,
        fine,
        p95_ratio,
    })
}

/// Scan interval for `check-assumptions`: `--domain`, else the model's
/// truncated invariant support, else the default scan domain.
pub fn run_check(cfg: &RunConfig) -> Result<AssumptionReport> {
    debug_assert_eq!(cfg.command, Command::CheckAssumptions);
    let domain = match (cfg.domain, &cfg.model) {
        (Some(d), _) => d,
        (None, Some(m)) => scan_domain(&invariant_density(m)?),
        (None, None) => DEFAULT_SCAN_DOMAIN,
    };
    check_assumptions(cfg.q()?, cfg.k()?, domain, cfg.grid_points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config;

    fn cfg(s: &str) -> RunConfig {
        let args = std::iter::once("fkavg").chain(s.split_whitespace());
        parse_config(args).unwrap()
    }

    #[test]
    fn nearest_rank_percentile() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&v, 95.0), 19.0);
        assert_eq!(percentile(&v, 100.0), 20.0);
        assert_eq!(percentile(&[3.0], 95.0), 3.0);
        assert_eq!(percentile(&[2.0, 1.0], 50.0), 1.0);
    }

    #[test]
    fn stderr_conventions() {
        assert_eq!(mean_and_stderr(&[1.5]), (1.5, 0.0));
        let (m, s) = mean_and_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn windows_are_long_enough_and_reproducible() {
        let mut a = stream(5, 1, Purpose::Windows);
        let mut b = stream(5, 1, Purpose::Windows);
        let wa = draw_windows(&mut a, 100, 200).unwrap();
        assert_eq!(wa, draw_windows(&mut b, 100, 200).unwrap());
        assert!(wa
            .iter()
            .all(|&(t, big)| big - t >= MIN_WINDOW_CELLS && big <= 100));
        assert!(draw_windows(&mut a, 9, 1).is_err());
    }

    #[test]
    fn constant_state_limit_is_exact() {
        let c =
            cfg("limit --model constant_state(x0=0.5) --q const(1) --K const(2) --T 100 --dt 0.01");
        let run = run_limit(&c).unwrap();
        let exact = 0.5 * (1.0 - (1.0 - (-200.0f64).exp()) / 200.0);
        assert!((run.row.ebar_mean - exact).abs() < 1e-9 * exact);
        assert_eq!(run.row.ebar_stderr, 0.0);
        assert_eq!(run.row.target, 0.5);
    }

    #[test]
    fn violations_block_limit_unless_allowed() {
        let base = "limit --model ou(1,0,1) --q const(1) --K offset_sin(a=1,b=1) --T 1 --dt 0.1";
        let e = run_limit(&cfg(base)).unwrap_err();
        assert_eq!(e.exit_code(), 4);
        // K = sin x vanishes at the edge of the scan interval but not at
        // the point mass, so the run itself is well defined
        let c = cfg("limit --model constant_state(x0=1) --q const(1) --K offset_sin(a=0,b=1) --T 1 --dt 0.1");
        assert_eq!(run_limit(&c).unwrap_err().exit_code(), 4);
        let mut c = c;
        c.allow_violations = true;
        let run = run_limit(&c).unwrap();
        assert!(!run.report.is_satisfied());
        assert_eq!(run.row.target, 1.0 / 1f64.sin());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let base = "mvt --model ou(1,0,1.4142136) --q const(1) --K offset_sin(2,1) --T 5 --dt 0.01 --paths 6 --seed 7 --windows 5";
        let one = run_mvt(&cfg(&format!("{base} --workers 1"))).unwrap();
        let four = run_mvt(&cfg(&format!("{base} --workers 4"))).unwrap();
        assert_eq!(one.records, four.records);
    }

    #[test]
    fn converge_prefixes_match_limit_runs() {
        let base =
            "--model ou(1,0,1) --q const(1) --K offset_sin(2,1) --dt 0.01 --paths 3 --seed 11";
        let conv = run_converge(&cfg(&format!("converge {base} --T-ladder 1,2"))).unwrap();
        let lim = run_limit(&cfg(&format!("limit {base} --T 1"))).unwrap();
        assert_eq!(conv.rows[0].ebar_mean, lim.row.ebar_mean);
        assert_eq!(conv.rows.len(), 2);
    }

    #[test]
    fn check_uses_model_support() {
        let c = cfg("check-assumptions --model ou(1,0,1.4142136) --q const(1) --K offset_sin(2,1)");
        let r = run_check(&c).unwrap();
        assert!(r.is_satisfied());
        assert!(r.domain.hi > 6.0 && r.domain.hi < 7.0, "{:?}", r.domain);
        let c = cfg("check-assumptions --q const(1) --K offset_sin(1,1)");
        let r = run_check(&c).unwrap();
        assert_eq!(r.domain, DEFAULT_SCAN_DOMAIN);
        assert!(!r.is_satisfied());
    }
}
