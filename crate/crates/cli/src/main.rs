//! Command-line runner for constrained bandit experiments.
//!
//! Two subcommands:
//!
//! * `run --config <file.toml>` — resolve, simulate, and write CSV
//!   artifacts. The common config knobs can be overridden from the command
//!   line for quick sweeps.
//! * `oracle --config <file.toml>` — build the environment only and print
//!   the best-mixture benchmark and Slater margin.
//!
//! Exit codes: 0 on success, 2 for configuration or input errors, 3 for
//! numerical degeneracies, 1 otherwise.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use ckb_core::config::{CliOverrides, ConfigFile};
use ckb_core::harness::{resolve, run_experiment};

#[derive(Parser)]
#[command(name = "ckb", version, about = "Constrained kernelized bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write metrics/trace CSV files.
    Run {
        /// Experiment description (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to the config's `output.dir`, then "results").
        #[arg(long)]
        out: Option<String>,
        /// Number of independent trials.
        #[arg(long)]
        trials: Option<usize>,
        /// Rounds per trial.
        #[arg(long)]
        horizon: Option<usize>,
        /// Base seed; trial i runs with seed + i.
        #[arg(long)]
        seed: Option<u64>,
        /// Constrained loop: "ckb" (projected dual ascent) or "lyapunov" (virtual queue).
        #[arg(long)]
        algorithm: Option<String>,
        /// Estimate strategy for both models: "ucb", "ts", "rand-gauss", or "rand-uniform:<n>".
        #[arg(long)]
        exploration: Option<String>,
        /// Constraint tightening: "off", "zero-violation", or a number.
        #[arg(long)]
        slack: Option<String>,
    },
    /// Print the environment's best-mixture benchmark and Slater margin.
    Oracle {
        /// Experiment description (TOML).
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() {
    if let Err(e) = dispatch(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn dispatch(cli: Cli) -> ckb_core::Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            trials,
            horizon,
            seed,
            algorithm,
            exploration,
            slack,
        } => {
            let mut cfg = ConfigFile::load(&config)?;
            CliOverrides {
                out,
                trials,
                horizon,
                seed,
                algorithm,
                exploration,
                slack,
            }
            .apply(&mut cfg)?;
            if cfg.output.dir.is_none() {
                cfg.output.dir = Some("results".into());
            }
            let (exp, result) = run_experiment(&cfg)?;
            for w in &exp.warnings {
                eprintln!("warning: {w}");
            }
            let last = result.series.horizon - 1;
            println!(
                "wrote {} trials x {} rounds to {}",
                exp.trials,
                exp.horizon,
                exp.out_dir.as_deref().unwrap_or(std::path::Path::new(".")).display()
            );
            println!(
                "final means: regret_plus {} / violation {} / strong violation {} / \
                 violated rounds {}",
                result.series.regret_plus.mean[last],
                result.series.violation.mean[last],
                result.series.strong_violation.mean[last],
                result.series.violated_rounds_mean[last],
            );
            Ok(())
        }
        Command::Oracle { config } => {
            let cfg = ConfigFile::load(&config)?;
            let exp = resolve(&cfg)?;
            println!("benchmark value: {}", exp.oracle.value);
            for (arm, weight) in &exp.oracle.support {
                println!("support: arm {arm} weight {weight}");
            }
            println!("slater margin: {}", exp.slater);
            Ok(())
        }
    }
}
