use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ri_monitor::io::commands::{
    cmd_compare, cmd_replay, cmd_run, cmd_sweep, resolve_seed, CliError, CompareArgs, ModeArg, ReplayArgs, RunArgs,
    SweepArgs, SweepParam, SEED_ENV,
};

#[derive(Parser)]
#[command(name = "ri-sim", version, about = "Simulate resource-interval metering deployments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeFlag {
    Ri,
    Ti,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamFlag {
    /// Quantum ΔR, absolute ("50ml") or relative to each meter's ("0.5x")
    Dr,
    /// Polling interval Δt of the baseline ("10 min")
    Dt,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario; writes events.ndjson, ledgers.ndjson and metrics.csv
    Run {
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeFlag>,
        /// Polling interval for ti/both, e.g. "1 h"
        #[arg(long)]
        dt: Option<String>,
        /// Channel seed (RI_SIM_SEED takes precedence)
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep ΔR or Δt; writes sweep.csv
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        param: ParamFlag,
        /// Comma-separated values
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Ri versus Ti polling at --dt on the same traces; writes compare.csv
    Compare {
        config: PathBuf,
        #[arg(long)]
        dt: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-ingest an event log into a fresh center and compare with saved ledgers
    Replay {
        config: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        ledgers: PathBuf,
    },
}

fn seed(flag: Option<u64>) -> Result<Option<u64>, CliError> {
    resolve_seed(flag, std::env::var(SEED_ENV).ok())
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run {
            config,
            mode,
            dt,
            seed: s,
            out,
        } => {
            let summary = cmd_run(&RunArgs {
                config,
                mode: mode.map(|m| match m {
                    ModeFlag::Ri => ModeArg::Ri,
                    ModeFlag::Ti => ModeArg::Ti,
                    ModeFlag::Both => ModeArg::Both,
                }),
                dt,
                seed: seed(s)?,
                out,
            })?;
            println!(
                "{} meters, {} events -> {}, {}, {}",
                summary.meters,
                summary.events,
                summary.events_path.display(),
                summary.ledgers_path.display(),
                summary.metrics_path.display()
            );
        }
        Command::Sweep {
            config,
            param,
            values,
            seed: s,
            out,
        } => {
            let path = cmd_sweep(&SweepArgs {
                config,
                param: match param {
                    ParamFlag::Dr => SweepParam::Dr,
                    ParamFlag::Dt => SweepParam::Dt,
                },
                values,
                seed: seed(s)?,
                out,
            })?;
            println!("{}", path.display());
        }
        Command::Compare {
            config,
            dt,
            seed: s,
            out,
        } => {
            let (path, rows) = cmd_compare(&CompareArgs {
                config,
                dt,
                seed: seed(s)?,
                out,
            })?;
            for r in &rows {
                println!(
                    "{}: {} messages, rmse {:.3}",
                    r.system, r.detail.message_count, r.detail.rmse
                );
            }
            println!("{}", path.display());
        }
        Command::Replay {
            config,
            events,
            ledgers,
        } => {
            let s = cmd_replay(&ReplayArgs {
                config,
                events,
                ledgers,
            })?;
            println!("replayed {} reports into {} ledgers: identical", s.ingested, s.ledgers);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
