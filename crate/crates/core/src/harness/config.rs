//! Run configuration: command-line flags layered over an optional TOML file.

use std::path::{Path, PathBuf};

use clap::error::{ContextKind, ContextValue};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::sde::SdeModel;
use crate::Interval;

/// Grid points used when the harness checks assumptions on its own.
pub const DEFAULT_GRID_POINTS: usize = 2001;

/// Relative slack allowed when checking that `T/dt` is a whole number.
const STEP_COUNT_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(
    name = "fkavg",
    version,
    about = "Time averages of Feynman-Kac functionals along diffusion paths"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Simulate sample paths and dump `t,x`.
    Simulate(CommonArgs),
    /// Dump `t,A,Y,ebar` for each path.
    Functional(CommonArgs),
    /// Verify the mean-value identity on random windows.
    Mvt {
        #[command(flatten)]
        common: CommonArgs,
        /// Random windows per path.
        #[arg(long)]
        windows: Option<usize>,
        /// Also rerun every window at dt/2 on the same Brownian motion.
        #[arg(long)]
        refine: bool,
    },
    /// Ensemble time average at the horizon against the quadrature target.
    Limit {
        #[command(flatten)]
        common: CommonArgs,
        /// Write the accepted quadrature panels to this CSV file.
        #[arg(long = "dump-panels", hide = true)]
        dump_panels: Option<PathBuf>,
    },
    /// Ensemble time averages along a ladder of horizons.
    Converge {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated increasing horizons, e.g. `50,100,200`.
        #[arg(long = "T-ladder", value_delimiter = ',')]
        t_ladder: Option<Vec<f64>>,
    },
    /// Scan q and K for the hypotheses of the ergodic limit.
    CheckAssumptions {
        #[command(flatten)]
        common: CommonArgs,
        /// Scan interval `lo,hi`.
        #[arg(long, value_delimiter = ',', num_args = 1)]
        domain: Option<Vec<f64>>,
        #[arg(long = "grid-points")]
        grid_points: Option<usize>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML file with the same keys; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub q: Option<String>,
    #[arg(long = "K")]
    pub k: Option<String>,
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// A real number or `stationary`.
    #[arg(long)]
    pub x0: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub allow_violations: bool,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    model: Option<String>,
    q: Option<String>,
    #[serde(rename = "K")]
    k: Option<String>,
    #[serde(rename = "T")]
    horizon: Option<f64>,
    dt: Option<f64>,
    paths: Option<usize>,
    seed: Option<u64>,
    x0: Option<FileX0>,
    out: Option<PathBuf>,
    allow_violations: Option<bool>,
    workers: Option<usize>,
    #[serde(rename = "T_ladder")]
    t_ladder: Option<Vec<f64>>,
    windows: Option<usize>,
    refine: Option<bool>,
    domain: Option<Vec<f64>>,
    grid_points: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FileX0 {
    Number(f64),
    Word(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Functional,
    Mvt,
    Limit,
    Converge,
    CheckAssumptions,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    Fixed(f64),
    /// One draw from the invariant density per path.
    Stationary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: Option<SdeModel>,
    pub q: Option<ScalarField>,
    pub k: Option<ScalarField>,
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub master_seed: u64,
    pub x0: InitialState,
    pub t_ladder: Vec<f64>,
    pub windows: usize,
    pub refine: bool,
    pub domain: Option<Interval>,
    pub grid_points: usize,
    pub out: Option<PathBuf>,
    /// Debug dump of the quadrature panels behind the target.
    pub panels_out: Option<PathBuf>,
    pub allow_violations: bool,
    pub workers: Option<usize>,
}

impl RunConfig {
    /// A configuration with the defaults every subcommand starts from.
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            model: None,
            q: None,
            k: None,
            horizon: f64::NAN,
            dt: f64::NAN,
            n_paths: 1,
            master_seed: 0,
            x0: InitialState::Stationary,
            t_ladder: Vec::new(),
            windows: 20,
            refine: false,
            domain: None,
            grid_points: DEFAULT_GRID_POINTS,
            out: None,
            panels_out: None,
            allow_violations: false,
            workers: None,
        }
    }

    pub fn model(&self) -> Result<&SdeModel> {
        self.model
            .as_ref()
            .ok_or_else(|| Error::config("--model", "missing required key"))
    }

    pub fn q(&self) -> Result<&ScalarField> {
        self.q
            .as_ref()
            .ok_or_else(|| Error::config("--q", "missing required key"))
    }

    pub fn k(&self) -> Result<&ScalarField> {
        self.k
            .as_ref()
            .ok_or_else(|| Error::config("--K", "missing required key"))
    }

    pub fn n_steps(&self) -> Result<usize> {
        step_count(self.horizon, self.dt, "--T")
    }

    /// Checks the keys the command needs and the step grid.
    pub fn validate(&self) -> Result<()> {
        if self.command == Command::CheckAssumptions {
            self.q()?;
            self.k()?;
            if self.grid_points < 2 {
                return Err(Error::config("--grid-points", "need at least 2"));
            }
            if let Some(d) = self.domain {
                if !(d.lo < d.hi) {
                    return Err(Error::config("--domain", "need lo < hi"));
                }
            }
            return Ok(());
        }
        self.model()?;
        if self.command != Command::Simulate {
            self.q()?;
            self.k()?;
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            if self.dt.is_nan() {
                return Err(Error::config("--dt", "missing required key"));
            }
            return Err(Error::config("--dt", "must be positive"));
        }
        if self.n_paths == 0 {
            return Err(Error::config("--paths", "need at least one path"));
        }
        if let Some(0) = self.workers {
            return Err(Error::config("--workers", "need at least one worker"));
        }
        if self.command == Command::Converge {
            if self.t_ladder.is_empty() {
                return Err(Error::config("--T-ladder", "missing required key"));
            }
            if self.t_ladder.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::config(
                    "--T-ladder",
                    "horizons must be strictly increasing",
                ));
            }
            for &t in &self.t_ladder {
                step_count(t, self.dt, "--T-ladder")?;
            }
        } else {
            if self.horizon.is_nan() {
                return Err(Error::config("--T", "missing required key"));
            }
            self.n_steps()?;
        }
        if self.command == Command::Mvt && self.windows == 0 {
            return Err(Error::config("--windows", "need at least one window"));
        }
        Ok(())
    }
}

/// Number of steps `T/dt`, which must be a positive whole number.
pub fn step_count(horizon: f64, dt: f64, key: &str) -> Result<usize> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::config(
            key,
            format!("horizon {horizon} must be positive"),
        ));
    }
    let ratio = horizon / dt;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > STEP_COUNT_TOL * n {
        return Err(Error::config(
            key,
            format!("T/dt = {horizon}/{dt} = {ratio} is not an integral number of steps"),
        ));
    }
    Ok(n as usize)
}

fn parse_x0(s: &str) -> Result<InitialState> {
    if s.trim() == "stationary" {
        return Ok(InitialState::Stationary);
    }
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(InitialState::Fixed)
        .ok_or_else(|| {
            Error::config(
                "--x0",
                format!("expected a real or `stationary`, got `{s}`"),
            )
        })
}

fn parse_domain(v: &[f64], key: &str) -> Result<Interval> {
    match v {
        [lo, hi] => Ok(Interval::new(*lo, *hi)),
        _ => Err(Error::config(key, "expected two values `lo,hi`")),
    }
}

fn with_key<T>(r: Result<T>, key: &str) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { token, message } => Error::config(key, format!("at `{token}`: {message}")),
        other => other,
    })
}

fn read_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("--config", format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::config("--config", e.message().to_string()))
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<RunConfig> {
        let (command, common) = match &cli.command {
            CliCommand::Simulate(c) => (Command::Simulate, c),
            CliCommand::Functional(c) => (Command::Functional, c),
            CliCommand::Mvt { common, .. } => (Command::Mvt, common),
            CliCommand::Limit { common, .. } => (Command::Limit, common),
            CliCommand::Converge { common, .. } => (Command::Converge, common),
            CliCommand::CheckAssumptions { common, .. } => (Command::CheckAssumptions, common),
        };
        let file = match &common.config {
            Some(path) => read_file(path)?,
            None => FileConfig::default(),
        };
        let mut cfg = RunConfig::new(command);

        let model = common.model.clone().or(file.model);
        let q = common.q.clone().or(file.q);
        let k = common.k.clone().or(file.k);
        cfg.model = model.map(|s| with_key(s.parse(), "--model")).transpose()?;
        cfg.q = q.map(|s| with_key(s.parse(), "--q")).transpose()?;
        cfg.k = k.map(|s| with_key(s.parse(), "--K")).transpose()?;
        cfg.horizon = common.horizon.or(file.horizon).unwrap_or(f64::NAN);
        cfg.dt = common.dt.or(file.dt).unwrap_or(f64::NAN);
        cfg.n_paths = common.paths.or(file.paths).unwrap_or(1);
        cfg.master_seed = common.seed.or(file.seed).unwrap_or(0);
        cfg.x0 = match (&common.x0, file.x0) {
            (Some(s), _) => parse_x0(s)?,
            (None, Some(FileX0::Number(v))) => InitialState::Fixed(v),
            (None, Some(FileX0::Word(s))) => parse_x0(&s)?,
            (None, None) => InitialState::Stationary,
        };
        cfg.out = common.out.clone().or(file.out);
        cfg.allow_violations = common.allow_violations || file.allow_violations.unwrap_or(false);
        cfg.workers = common.workers.or(file.workers);

        match cli.command {
            CliCommand::Limit { dump_panels, .. } => cfg.panels_out = dump_panels,
            CliCommand::Mvt {
                windows, refine, ..
            } => {
                cfg.windows = windows.or(file.windows).unwrap_or(cfg.windows);
                cfg.refine = refine || file.refine.unwrap_or(false);
            }
            CliCommand::Converge { t_ladder, .. } => {
                cfg.t_ladder = t_ladder.or(file.t_ladder).unwrap_or_default();
                if let Some(&last) = cfg.t_ladder.last() {
                    if !cfg.horizon.is_nan() && cfg.horizon != last {
                        return Err(Error::config(
                            "--T",
                            "conflicts with the last --T-ladder entry",
                        ));
                    }
                    cfg.horizon = last;
                }
            }
            CliCommand::CheckAssumptions {
                domain,
                grid_points,
                ..
            } => {
                cfg.domain = match domain.or(file.domain) {
                    Some(v) => Some(parse_domain(&v, "--domain")?),
                    None => None,
                };
                cfg.grid_points = grid_points
                    .or(file.grid_points)
                    .unwrap_or(DEFAULT_GRID_POINTS);
            }
            _ => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses an argument vector (program name first) into a validated
/// configuration. Clap usage errors become configuration errors naming the
/// offending flag.
pub fn parse_config<I, T>(args: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| {
        let key = match e.get(ContextKind::InvalidArg) {
            Some(ContextValue::String(s)) => s.split_whitespace().next().unwrap_or(s).to_string(),
            Some(ContextValue::Strings(v)) => v.join(","),
            _ => e.kind().to_string(),
        };
        Error::config(key, e.render().to_string().trim().to_string())
    })?;
    RunConfig::from_cli(cli)
}
