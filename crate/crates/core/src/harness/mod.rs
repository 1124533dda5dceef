//! Command-line experiments: configuration, runs and CSV reports.

pub mod config;
pub mod report;
pub mod run;

pub use config::{parse_config, step_count, Cli, Command, InitialState, RunConfig};
pub use run::{
    draw_windows, run_check, run_converge, run_functional, run_limit, run_mvt, run_mvt_refinement,
    run_simulate, ConvergenceRow, MvtRun, MvtSummary, RefinementStudy,
};
