//! Command-line front end: config loading, the five subcommands and their
//! artifacts. The `nvmap` binary is a thin wrapper over [`run`].

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod oracle_cmd;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::{LoadedConfig, RunConfig};
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "nvmap", version, about = "Near-field microwave imaging with NV-center ensembles")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; overrides `threads` in the config.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Noise seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the scene and write the probe-plane field map.
    Simulate,
    /// Synthesize the camera acquisition and extract the Rabi map.
    Pipeline,
    /// Hotspot frequency against MW power and the square-root fit.
    Sweep,
    /// Tabulate an analytic reference field.
    Oracle(oracle_cmd::OracleArgs),
    /// Check the config without running anything.
    Validate,
}

fn load(cli: &Cli) -> Result<LoadedConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => LoadedConfig::load(p)?,
        None => LoadedConfig::from_str("", &std::env::current_dir()?)?,
    };
    if let Some(o) = &cli.out {
        // Relative to the working directory, not the config file.
        cfg.config.out = std::env::current_dir()?.join(o);
    }
    if let Some(t) = cli.threads {
        cfg.config.threads = Some(t);
    }
    if let Some(s) = cli.seed {
        cfg.config.seed = s;
    }
    Ok(cfg)
}

/// Run one invocation; returns the lines to print on success.
pub fn run(cli: &Cli) -> Result<Vec<String>, CliError> {
    let cfg = load(cli)?;
    if !matches!(cli.command, Command::Oracle(_)) && cli.config.is_none() {
        return Err(CliError::Validation("--config is required".into()));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.config.threads {
        if t == 0 {
            return Err(CliError::Validation("threads must be >= 1".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(cli, &cfg))
}

fn dispatch(cli: &Cli, cfg: &LoadedConfig) -> Result<Vec<String>, CliError> {
    let started = std::time::Instant::now();
    let mut lines = Vec::new();
    match &cli.command {
        Command::Validate => {
            cfg.validate()?;
            lines.push(format!("config ok sha256={}", cfg.hash));
        }
        Command::Simulate => {
            let out = commands::simulate(cfg)?;
            lines.push(format!(
                "converged: relative change {:e} after {} cycles ({} steps)",
                out.run.convergence, out.run.cycles, out.run.steps
            ));
            lines.extend(out.files.iter().map(|f| format!("wrote {}", f.display())));
        }
        Command::Pipeline => {
            let out = commands::pipeline(cfg)?;
            lines.extend(out.report.render().lines().map(str::to_string));
            lines.extend(out.files.iter().map(|f| format!("wrote {}", f.display())));
        }
        Command::Sweep => {
            let out = commands::sweep(cfg)?;
            lines.extend(out.report.render().lines().map(str::to_string));
            lines.extend(out.files.iter().map(|f| format!("wrote {}", f.display())));
            if let Some((dbm, e)) = out.failure {
                return Err(CliError::Validation(format!("sweep stopped at {dbm} dBm: {e}")));
            }
        }
        Command::Oracle(args) => {
            let f = oracle_cmd::oracle(args, &cfg.out_dir(), &cfg.hash)?;
            lines.push(format!("wrote {}", f.display()));
        }
    }
    lines.push(format!("wall time {:.2} s", started.elapsed().as_secs_f64()));
    Ok(lines)
}
