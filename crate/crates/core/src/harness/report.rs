//! CSV writers. Reals use `{:.16e}`, which round-trips every f64.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::fields::AssumptionReport;
use crate::functional::FunctionalSeries;
use crate::mvt::MvtRecord;
use crate::quad::Panel;
use crate::sde::SamplePath;

use super::run::ConvergenceRow;

pub fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush()?;
    Ok(())
}

pub fn write_path<W: Write>(out: W, path: &SamplePath) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["t", "x"])?;
    for (i, x) in path.states.iter().enumerate() {
        w.write_record([fmt_real(path.time(i)), fmt_real(*x)])?;
    }
    finish(w)
}

pub fn write_series<W: Write>(out: W, s: &FunctionalSeries) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["t", "A", "Y", "ebar"])?;
    for i in 0..=s.n_steps() {
        w.write_record([
            fmt_real(s.time(i)),
            fmt_real(s.cumulative_k[i]),
            fmt_real(s.values[i]),
            fmt_real(s.ebar[i]),
        ])?;
    }
    finish(w)
}

pub fn write_mvt<W: Write>(out: W, records: &[MvtRecord]) -> Result<()> {
    let mut w = writer(out);
    w.write_record([
        "t",
        "T",
        "r",
        "xi",
        "crossing_found",
        "lhs",
        "rhs",
        "residual",
    ])?;
    for r in records {
        w.write_record([
            fmt_real(r.t),
            fmt_real(r.horizon),
            fmt_real(r.r),
            fmt_real(r.xi),
            r.crossing_found.to_string(),
            fmt_real(r.lhs),
            fmt_real(r.rhs),
            fmt_real(r.residual),
        ])?;
    }
    finish(w)
}

pub fn write_convergence<W: Write>(out: W, rows: &[ConvergenceRow]) -> Result<()> {
    let mut w = writer(out);
    w.write_record([
        "T",
        "ebar_mean",
        "ebar_stderr",
        "target",
        "abs_gap",
        "n_paths",
    ])?;
    for r in rows {
        w.write_record([
            fmt_real(r.horizon),
            fmt_real(r.ebar_mean),
            fmt_real(r.ebar_stderr),
            fmt_real(r.target),
            fmt_real(r.abs_gap),
            r.n_paths.to_string(),
        ])?;
    }
    finish(w)
}

pub fn write_panels<W: Write>(out: W, panels: &[Panel]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["lo", "hi", "estimate", "error"])?;
    for p in panels {
        w.write_record([
            fmt_real(p.lo),
            fmt_real(p.hi),
            fmt_real(p.estimate),
            fmt_real(p.error),
        ])?;
    }
    finish(w)
}

/// A header and one row of scan results. Violations are listed by the
/// report's `Display`.
pub fn write_assumptions<W: Write>(out: W, r: &AssumptionReport) -> Result<()> {
    let mut w = writer(out);
    w.write_record([
        "x_lo",
        "x_hi",
        "grid_points",
        "inf_K",
        "inf_K_lower_bound",
        "sup_abs_q",
        "sup_abs_ratio_deriv",
        "satisfied",
    ])?;
    w.write_record([
        fmt_real(r.domain.lo),
        fmt_real(r.domain.hi),
        r.grid_points.to_string(),
        fmt_real(r.inf_k),
        fmt_real(r.inf_k_lower_bound),
        fmt_real(r.sup_abs_q),
        fmt_real(r.sup_abs_ratio_deriv),
        r.is_satisfied().to_string(),
    ])?;
    finish(w)
}

/// `base` itself for a single output, else `stem.{index}.ext`.
pub fn indexed_path(base: &Path, index: usize, count: usize) -> PathBuf {
    if count == 1 {
        return base.to_path_buf();
    }
    tagged_path(base, &index.to_string())
}

/// `stem.{tag}.ext` next to `base`.
pub fn tagged_path(base: &Path, tag: &str) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}.{tag}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{tag}"),
    };
    base.with_file_name(name)
}
