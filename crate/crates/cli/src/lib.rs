//! Command-line front end: configuration, experiment runners, artifacts.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{parse_list, parse_override, toml_array, ConfigError, RunConfig};
use output::Summary;

/// Recorded in every resolved config and summary.
pub const VERSION: &str = concat!("spikelab ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Parser)]
#[command(name = "spikelab", version, about = "Spike concentration experiments for -eps^2 div(J grad u) + V u = u^p with Neumann data")]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (single-table commands) or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for data-parallel kernels.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Seed for randomized probes (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Set a config value by dot path, e.g. numerics.eps=0.1. Repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Radial ground state, moments and decay rate.
    GroundState {
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Γ on a lattice and its critical points.
    GammaScan {
        #[arg(long)]
        lattice: Option<usize>,
    },
    /// Newton continuation down the ε-ladder.
    Solve {
        #[arg(long)]
        q0: Option<String>,
        #[arg(long = "eps-ladder")]
        eps_ladder: Option<String>,
    },
    /// Reduced energy and diagnostics at one center.
    Reduce {
        #[arg(long)]
        q: Option<String>,
        #[arg(long = "eps-ladder")]
        eps_ladder: Option<String>,
    },
    /// Reduced energy over a lattice of centers.
    VerifyExpansion {
        #[arg(long)]
        lattice: Option<usize>,
        #[arg(long = "eps-ladder")]
        eps_ladder: Option<String>,
    },
    /// Continuation from a Γ minimum with offset and slope tracking.
    SpikeTrack {
        #[arg(long)]
        q0: Option<String>,
        #[arg(long = "eps-ladder")]
        eps_ladder: Option<String>,
    },
}

#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Numerical(spikelab_core::Error),
    Io(std::io::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) | Failure::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "{e}"),
            Failure::Numerical(e) => write!(f, "numerical failure: {e}"),
            Failure::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for Failure {}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<spikelab_core::Error> for Failure {
    fn from(e: spikelab_core::Error) -> Self {
        Failure::Numerical(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

/// Subcommand flags become overrides applied after `--override`.
fn flag_overrides(cmd: &Command) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    let mut list = |key: &str, raw: &Option<String>| -> Result<(), ConfigError> {
        if let Some(raw) = raw {
            let v = parse_list(key, raw)?;
            out.push((key.to_string(), toml_array(&v)));
        }
        Ok(())
    };
    match cmd {
        Command::GroundState { .. } => {}
        Command::GammaScan { .. } => {}
        Command::Solve { q0, eps_ladder } | Command::SpikeTrack { q0, eps_ladder } => {
            list("experiment.q0", q0)?;
            list("numerics.eps_ladder", eps_ladder)?;
        }
        Command::Reduce { q, eps_ladder } => {
            list("experiment.q", q)?;
            list("numerics.eps_ladder", eps_ladder)?;
        }
        Command::VerifyExpansion { eps_ladder, .. } => list("numerics.eps_ladder", eps_ladder)?,
    }
    if let Command::GammaScan { lattice: Some(k) } | Command::VerifyExpansion { lattice: Some(k), .. } = cmd {
        out.push(("experiment.lattice".into(), k.to_string()));
    }
    Ok(out)
}

/// Resolve the configuration and run the chosen experiment.
pub fn run(cli: &Cli) -> Result<Summary, Failure> {
    let mut overrides = cli.overrides.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>, _>>()?;
    overrides.extend(flag_overrides(&cli.command)?);
    if let Some(seed) = cli.seed {
        overrides.push(("experiment.seed".into(), seed.to_string()));
    }
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides)?;
    let single = !matches!(cli.command, Command::Solve { .. } | Command::SpikeTrack { .. });
    let name = match &cli.command {
        Command::GroundState { .. } => "ground-state",
        Command::GammaScan { .. } => "gamma-scan",
        Command::Solve { .. } => "solve",
        Command::Reduce { .. } => "reduce",
        Command::VerifyExpansion { .. } => "verify-expansion",
        Command::SpikeTrack { .. } => "spike-track",
    };
    let out = cli.out.clone().or_else(|| cfg.output.clone()).unwrap_or_else(|| commands::default_out(name, single));

    let job = || match &cli.command {
        Command::GroundState { dim, p, tol } => commands::ground_state(
            &cfg,
            dim.unwrap_or(cfg.problem.dim),
            p.unwrap_or(cfg.problem.exponent),
            tol.unwrap_or(cfg.numerics.ground_state_tol),
            &out,
        ),
        Command::GammaScan { .. } => commands::gamma_scan(&cfg, &out),
        Command::Solve { .. } => commands::solve(&cfg, &out),
        Command::Reduce { .. } => commands::reduce(&cfg, &out),
        Command::VerifyExpansion { .. } => commands::verify_expansion(&cfg, &out),
        Command::SpikeTrack { .. } => commands::spike_track(&cfg, &out),
    };
    match cli.jobs {
        Some(0) => Err(ConfigError("jobs: must be at least 1".into()).into()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| ConfigError(format!("jobs: {e}")))?;
            pool.install(job)
        }
        None => job(),
    }
}

/// Parse `args`, run, print the summary; returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(summary) => {
            print!("{}", summary.render());
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
