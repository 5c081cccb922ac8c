use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use freezer_cli::{calibrate, errors, serve, simulate, CliError, ServeOptions};
use freezer_core::sim::DEFAULT_DRAIN_MS;

#[derive(Parser)]
#[command(name = "freezer", version, about = "Chest-freezer inventory simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write events.log, sms.trace and report.json.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Simulated time to keep running after the last directive.
        #[arg(long, default_value_t = DEFAULT_DRAIN_MS)]
        drain_ms: u64,
    },
    /// Fit a calibration line to a `raw,kg` CSV.
    Calibrate {
        #[arg(long)]
        pairs: PathBuf,
    },
    /// Recompute one of the bundled measurement-error tables.
    Errors {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
        table: u8,
    },
    /// Serve the gateway HTTP API over a live simulation.
    Serve {
        #[arg(long)]
        port: u16,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        realtime_factor: f64,
        /// Persist the event log here; replayed on startup if present.
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            scenario,
            seed,
            out,
            drain_ms,
        } => {
            let report = simulate(&scenario, seed, &out, drain_ms)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        Command::Calibrate { pairs } => {
            let cal = calibrate(&pairs)?;
            println!("factor {}", cal.factor());
            println!("offset {}", cal.offset());
        }
        Command::Errors { table } => errors(table, &mut std::io::stdout().lock())?,
        Command::Serve {
            port,
            scenario,
            seed,
            realtime_factor,
            log,
        } => {
            let runtime = tokio::runtime::Runtime::new()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            runtime.block_on(serve(ServeOptions {
                port,
                scenario,
                seed,
                realtime_factor,
                log,
            }))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
