use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fbf_cli::commands::{self, Outcome};
use fbf_core::suites::{Mutation, Suite};

#[derive(Parser)]
#[command(name = "fbf", version)]
#[command(about = "Forward-backward-forward dynamics: solves, sweeps, and property checks")]
struct Cli {
    /// Exit with status 2 when any monitor reports a violation
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solve described by a TOML config
    Solve { config: PathBuf },
    /// Run a property suite: operators, dynamics, rates, ergodic, or all
    Check {
        suite: Suite,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Deliberately break an operator (negative control)
        #[arg(long, hide = true)]
        mutate: Option<Mutation>,
    },
    /// Repeat a solve over several values of one numeric config key
    Sweep {
        config: PathBuf,
        /// Dotted key, e.g. `schedule.value`
        #[arg(long)]
        param: String,
        /// Comma-separated values
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = io::stdout().lock();
    let result = match cli.command {
        Command::Solve { config } => commands::solve(&config, cli.strict, &mut stdout),
        Command::Check { suite, seed, mutate } => commands::check(suite, seed, mutate, &mut stdout),
        Command::Sweep {
            config,
            param,
            values,
        } => commands::parse_values(&values)
            .and_then(|v| commands::sweep(&config, &param, &v, cli.strict, &mut stdout)),
    };
    match result {
        Ok(outcome) => ExitCode::from(outcome as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Outcome::Error as u8)
        }
    }
}
