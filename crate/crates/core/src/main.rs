use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::process::ExitCode;

use clap::Parser;
use fkavg::harness::report::{self, indexed_path, tagged_path};
use fkavg::harness::{self, Cli, Command, RunConfig};
use fkavg::{Error, Result};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match RunConfig::from_cli(cli).and_then(|cfg| run(&cfg)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn sink(cfg: &RunConfig, index: usize, count: usize) -> Result<Box<dyn Write>> {
    match &cfg.out {
        Some(base) => open(&indexed_path(base, index, count)),
        None if count == 1 => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
        None => Err(Error::Config {
            key: "--out".into(),
            message: format!("{count} outputs need a file; stdout takes one"),
        }),
    }
}

fn open(path: &Path) -> Result<Box<dyn Write>> {
    Ok(Box::new(BufWriter::new(File::create(path)?)))
}

fn print_warnings(warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn print_mvt(label: &str, run: &harness::MvtRun) {
    let s = &run.summary;
    eprintln!(
        "{label}windows {} (skipped {}), max |residual| {:.3e}, p95 relative residual {:.3e}, crossing rate {:.3}",
        s.windows, s.skipped, s.max_abs_residual, s.p95_relative_residual, s.crossing_rate
    );
    for f in &run.failures {
        eprintln!(
            "skipped path {} window [{}, {}]: {}",
            f.path_index, f.t_index, f.horizon_index, f.reason
        );
    }
}

fn run(cfg: &RunConfig) -> Result<u8> {
    match cfg.command {
        Command::Simulate => {
            let paths = harness::run_simulate(cfg)?;
            for (i, p) in paths.iter().enumerate() {
                report::write_path(sink(cfg, i, paths.len())?, p)?;
            }
        }
        Command::Functional => {
            let series = harness::run_functional(cfg)?;
            for (i, s) in series.iter().enumerate() {
                print_warnings(&s.warnings);
                report::write_series(sink(cfg, i, series.len())?, s)?;
            }
        }
        Command::Mvt if cfg.refine => {
            let study = harness::run_mvt_refinement(cfg)?;
            print_mvt("dt:   ", &study.coarse);
            print_mvt("dt/2: ", &study.fine);
            eprintln!(
                "p95 relative residual ratio (dt over dt/2): {:.3}",
                study.p95_ratio
            );
            report::write_mvt(sink(cfg, 0, 1)?, &study.coarse.records)?;
            if let Some(base) = &cfg.out {
                report::write_mvt(open(&tagged_path(base, "fine"))?, &study.fine.records)?;
            }
        }
        Command::Mvt => {
            let run = harness::run_mvt(cfg)?;
            print_mvt("", &run);
            report::write_mvt(sink(cfg, 0, 1)?, &run.records)?;
        }
        Command::Limit => {
            let run = harness::run_limit(cfg)?;
            print_warnings(&run.warnings);
            if !run.report.is_satisfied() {
                eprintln!("warning: assumptions violated: {}", run.report);
            }
            eprintln!(
                "target {} (error estimate {:.3e})",
                report::fmt_real(run.target.value),
                run.target.abs_error_estimate
            );
            if let Some(p) = &cfg.panels_out {
                report::write_panels(open(p)?, &run.target.panels)?;
            }
            report::write_convergence(sink(cfg, 0, 1)?, &[run.row])?;
        }
        Command::Converge => {
            let run = harness::run_converge(cfg)?;
            print_warnings(&run.warnings);
            if !run.report.is_satisfied() {
                eprintln!("warning: assumptions violated: {}", run.report);
            }
            report::write_convergence(sink(cfg, 0, 1)?, &run.rows)?;
        }
        Command::CheckAssumptions => {
            let r = harness::run_check(cfg)?;
            report::write_assumptions(sink(cfg, 0, 1)?, &r)?;
            if !r.is_satisfied() {
                eprintln!("{r}");
                return Ok(Error::AssumptionViolation(String::new()).exit_code() as u8);
            }
        }
    }
    Ok(0)
}
