//! Command-line front end for `dirac_bohm`: reads a TOML run configuration,
//! runs one experiment and writes CSV/JSON artifacts plus a checksummed manifest.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use toml::Value;

use crate::config::{Command, RunConfig};
use crate::output::{Artifacts, Manifest, RunLock};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "DIRAC_BOHM_OUT";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<dirac_bohm::Error> for CliError {
    fn from(e: dirac_bohm::Error) -> Self {
        use dirac_bohm::Error as E;
        match e {
            E::Domain(_) | E::Validation(_) | E::Degenerate(_) | E::DomainCut { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "dirac-bohm",
    version,
    about = "Dirac packet evolution and Bohmian trajectory experiments"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    /// Run directory (overrides `out_dir`).
    #[arg(short, long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Override any config key, e.g. `--set packet.sigma=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub set: Vec<String>,
    #[arg(long, global = true)]
    pub sigma: Option<f64>,
    #[arg(long, global = true)]
    pub k0: Option<f64>,
    #[arg(long, global = true)]
    pub theta0: Option<f64>,
    #[arg(long, global = true)]
    pub omega0: Option<f64>,
    #[arg(long, global = true)]
    pub mass: Option<f64>,
    /// Print the merged configuration as TOML and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub t_final: Option<f64>,
    /// `exact` or `spa`.
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Exact spinor on a (t, s) grid.
    Field,
    /// SPA error along an omega ladder.
    SpaCompare {
        /// Comma separated geometric ladder.
        #[arg(long, value_delimiter = ',')]
        omegas: Option<Vec<f64>>,
    },
    /// Trajectory ensemble with classification and bifurcation point.
    Trajectories(EnsembleArgs),
    /// Bloch vectors along an ensemble and their terminal clusters.
    Bloch(EnsembleArgs),
    /// Momentum and energy expectations and Bohmian observables.
    Observables,
    /// Barrier constants and grid sign check.
    Barriers,
}

impl Cmd {
    pub fn command(&self) -> Command {
        match self {
            Cmd::Field => Command::Field,
            Cmd::SpaCompare { .. } => Command::SpaCompare,
            Cmd::Trajectories(_) => Command::Trajectories,
            Cmd::Bloch(_) => Command::Bloch,
            Cmd::Observables => Command::Observables,
            Cmd::Barriers => Command::Barriers,
        }
    }
}

impl Cli {
    /// `--set` entries followed by the typed flags, in `key=value` form.
    pub fn overrides(&self) -> Vec<String> {
        let mut o = self.set.clone();
        let mut f = |key: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push(format!("{key}={v}"));
            }
        };
        let float = |x: Option<f64>| x.map(|v| format!("{v:?}"));
        let quoted = |p: &std::path::Path| Value::String(p.display().to_string()).to_string();
        f("out_dir", self.out.as_deref().map(quoted));
        f("seed", self.seed.map(|s| s.to_string()));
        f("workers", self.workers.map(|w| w.to_string()));
        f("packet.sigma", float(self.sigma));
        f("packet.k0", float(self.k0));
        f("packet.theta0", float(self.theta0));
        f("packet.omega0", float(self.omega0));
        f("packet.mass", float(self.mass));
        match &self.command {
            Cmd::SpaCompare { omegas: Some(w) } => {
                let list: Vec<String> = w.iter().map(|x| format!("{x:?}")).collect();
                f("spa_compare.omegas", Some(format!("[{}]", list.join(", "))));
            }
            Cmd::Trajectories(a) | Cmd::Bloch(a) => {
                let sec = if matches!(self.command, Cmd::Bloch(_)) {
                    "bloch"
                } else {
                    "trajectories"
                };
                f(&format!("{sec}.n"), a.n.map(|n| n.to_string()));
                f(&format!("{sec}.t_final"), float(a.t_final));
                f(&format!("{sec}.mode"), a.mode.as_ref().map(|m| format!("{m:?}")));
            }
            _ => {}
        }
        o
    }

    pub fn load_config(&self) -> Result<RunConfig, CliError> {
        config::load(self.config.as_deref(), &self.overrides())
    }
}

/// Run directory: `out_dir`, else `$DIRAC_BOHM_OUT/<command>`, else `runs/<command>`.
pub fn run_dir(cfg: &RunConfig, cmd: Command) -> PathBuf {
    match &cfg.out_dir {
        Some(d) => d.clone(),
        None => {
            let root = std::env::var_os(OUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("runs"));
            root.join(cmd.name())
        }
    }
}

/// Validates, runs and writes one command. A completed run with unusable
/// results still writes its files and then reports `Numerical`.
pub fn execute(cfg: &RunConfig, cmd: Command) -> Result<(PathBuf, Manifest), CliError> {
    cfg.validate(cmd)?;
    let workers = cfg.workers.unwrap_or_else(rayon::current_num_threads);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {workers} workers: {e}")))?;
    let dir = run_dir(cfg, cmd);
    let _lock = RunLock::acquire(&dir)?;
    let mut art = Artifacts::default();
    let failure = pool.install(|| commands::run(cmd, cfg, &mut art))?;
    let manifest = art.write(&dir, cmd.name(), cfg, workers)?;
    match failure {
        Some(msg) => Err(CliError::Numerical(format!(
            "{msg}; partial results in {}",
            dir.display()
        ))),
        None => Ok((dir, manifest)),
    }
}

/// Parses `args`, runs, prints a one-line report and returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let cfg = match cli.load_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return 0;
    }
    match execute(&cfg, cli.command.command()) {
        Ok((dir, m)) => {
            println!(
                "{}: wrote {} files to {}",
                cli.command.command().name(),
                m.files.len(),
                dir.display()
            );
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
