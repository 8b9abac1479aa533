//! `singhyp`: batch certification runs from a JSON config.
//!
//! Exit codes: 0 certified evidence, 2 inconclusive, 3 refuted at a sample,
//! 1 usage or runtime error.

mod config;
mod identities;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use singhyp::DeltaPolicy;

use crate::config::{parse_config, RunConfig};
use crate::run::{Outcome, ReportBundle};

#[derive(Parser)]
#[command(name = "singhyp", version, about = "Numerical evidence of singular hyperbolicity for flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check exterior-algebra identities on random matrices.
    Identities {
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write identities.json here.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Quadratic-form certification along the sampling plan.
    Certify(RunArgs),
    /// Splitting estimate and adapted metric, on top of certification.
    Metric(RunArgs),
    /// Integrate orbits and cocycles; CSV output only.
    Orbit(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file (alternative to --config).
    #[arg(value_name = "CONFIG", conflicts_with = "config")]
    path: Option<PathBuf>,
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `output`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Restricts certification to one δ policy.
    #[arg(long, value_enum)]
    policy: Option<PolicyArg>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyArg {
    Midpoint,
    Sup,
    Inf,
}

impl From<PolicyArg> for DeltaPolicy {
    fn from(p: PolicyArg) -> Self {
        match p {
            PolicyArg::Midpoint => DeltaPolicy::Midpoint,
            PolicyArg::Sup => DeltaPolicy::SupMinusEps,
            PolicyArg::Inf => DeltaPolicy::InfPlusEps,
        }
    }
}

fn load(args: &RunArgs) -> Result<RunConfig, String> {
    let path = args.path.as_ref().or(args.config.as_ref()).ok_or("a config file is required (CONFIG or --config)")?;
    let mut cfg = parse_config(path).map_err(|e| e.to_string())?;
    if let Some(out) = &args.out {
        cfg.output = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(p) = args.policy {
        cfg.policies = vec![p.into()];
    }
    Ok(cfg)
}

fn write_bundle(dir: &Path, bundle: &ReportBundle) -> Result<(), String> {
    fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let log = ("run.log".to_string(), bundle.log.clone().into_bytes());
    for (name, bytes) in bundle.files.iter().chain(std::iter::once(&log)) {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(())
}

fn finish(outcome: Outcome, dir: Option<&Path>, quiet: bool) -> Result<u8, String> {
    if let Some(dir) = dir {
        write_bundle(dir, &outcome.bundle)?;
    }
    if !quiet {
        print!("{}", outcome.bundle.log);
        if let Some(dir) = dir {
            println!("wrote {} files to {}", outcome.bundle.files.len() + 1, dir.display());
        }
    }
    Ok(outcome.exit_code as u8)
}

fn pipeline(args: &RunArgs, f: fn(&RunConfig) -> Result<Outcome, run::RunError>) -> Result<u8, String> {
    let cfg = load(args)?;
    finish(f(&cfg).map_err(|e| e.to_string())?, Some(&cfg.output), args.quiet)
}

fn dispatch(cli: Cli) -> Result<u8, String> {
    match cli.command {
        Command::Identities { dim, trials, seed, out, quiet } => {
            if dim == 0 || trials == 0 {
                return Err("--dim and --trials must be at least 1".into());
            }
            let outcome = run::identities(dim, trials, seed).map_err(|e| e.to_string())?;
            finish(outcome, out.as_deref(), quiet)
        }
        Command::Certify(args) => pipeline(&args, run::certify),
        Command::Metric(args) => pipeline(&args, run::metric),
        Command::Orbit(args) => pipeline(&args, run::orbit),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("singhyp: {msg}");
            ExitCode::from(1)
        }
    }
}
