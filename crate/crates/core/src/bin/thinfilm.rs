use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thinfilm::cli::{cmd_mms, cmd_run, cmd_sweep, SweepParam, EXIT_USAGE};

/// Shear-thinning thin-film simulator.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one configuration and write diagnostics, snapshots and a report.
    Run { config: PathBuf },
    /// Manufactured-solution convergence study.
    Mms { config: PathBuf },
    /// Independent runs over a list of parameter values.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let code = match cli.command {
        Command::Run { config } => cmd_run(&config),
        Command::Mms { config } => cmd_mms(&config),
        Command::Sweep {
            config,
            param,
            values,
        } => cmd_sweep(&config, param, &values),
    };
    ExitCode::from(code as u8)
}
