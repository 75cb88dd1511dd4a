//! `nhmetro`: run QFI, estimation, optimality and dilation sweeps from a
//! JSON config and write CSV.
//!
//! Exit codes: 0 ok, 1 config error, 2 numerical failure, 3 partial.

mod config;
mod run;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{build_plan, load_config, ConfigError, Plan};
use crate::run::Tally;

#[derive(Parser)]
#[command(name = "nhmetro", version, about = "Non-Hermitian metrology sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// QFI, normalization and generator gap over the grid.
    Qfi(RunArgs),
    /// Seeded Monte-Carlo maximum-likelihood estimation.
    Estimate(RunArgs),
    /// Optimal-measurement residual and error-propagation precision.
    Optimal(RunArgs),
    /// Dilated Hermitian evolution against the direct dynamics.
    Dilate(RunArgs),
    /// Parse and check the config only.
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides `estimation.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output.csv_path`; stdout when neither is given.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Suppress the summary on stderr.
    #[arg(long)]
    quiet: bool,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

fn prepare(args: &RunArgs, needs_estimation: bool) -> Result<(Plan, Option<String>), ConfigError> {
    let cfg = load_config(&args.config)?;
    let mut plan = build_plan(&cfg)?;
    if let Some(seed) = args.seed {
        if let Some(est) = plan.estimation.as_mut() {
            est.seed = seed;
        }
    }
    if needs_estimation && plan.estimation.is_none() {
        return Err(ConfigError {
            path: "estimation".into(),
            message: "required by the estimate command".into(),
        });
    }
    if let Some(out) = &args.out {
        plan.csv_path = Some(out.clone());
    }
    Ok((plan, cfg.description))
}

fn exit_for(tally: Tally) -> u8 {
    match tally.failed {
        0 => 0,
        f if f == tally.rows => EXIT_NUMERICAL,
        _ => EXIT_PARTIAL,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let (args, name) = match &cli.command {
        Command::Qfi(a) => (a, "qfi"),
        Command::Estimate(a) => (a, "estimate"),
        Command::Optimal(a) => (a, "optimal"),
        Command::Dilate(a) => (a, "dilate"),
        Command::Validate(a) => (a, "validate"),
    };
    let (plan, description) = match prepare(args, matches!(cli.command, Command::Estimate(_))) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("config error in {}: {e}", args.config.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let out = plan.csv_path.as_deref();
    let result = match &cli.command {
        Command::Qfi(_) => run::qfi(&plan, out),
        Command::Estimate(_) => run::estimate(&plan, out),
        Command::Optimal(_) => run::optimal(&plan, out),
        Command::Dilate(_) => run::dilate(&plan, out),
        Command::Validate(_) => {
            if !args.quiet {
                eprintln!(
                    "ok: {} model, {} grid points{}",
                    plan.model.family_name(),
                    plan.times.len() * plan.probes.len(),
                    description.map_or(String::new(), |d| format!(" ({d})"))
                );
            }
            return ExitCode::SUCCESS;
        }
    };
    match result {
        Ok(tally) => {
            if !args.quiet {
                let dest = out.map_or("stdout".into(), |p| p.display().to_string());
                eprintln!("{name}: {} rows, {} failed -> {dest}", tally.rows, tally.failed);
            }
            ExitCode::from(exit_for(tally))
        }
        Err(e) => {
            eprintln!("{name}: cannot write output: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
