mod config;
mod run;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use run::{CliError, Runner};

/// Krein-formula perturbation lab: bound states, Green-function grids, and
/// invariant verification for point and segment perturbations of -Laplacian.
#[derive(Parser)]
#[command(name = "krein-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Path to the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for CSV artifacts and the JSON summary.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for randomized verification models.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Locate negative-energy bound states of the configured model.
    BoundStates(CommonArgs),
    /// Evaluate the perturbed resolvent of a source on a grid.
    Green(CommonArgs),
    /// Run the model's invariant suite and report violations.
    Verify(CommonArgs),
    /// Extract the logarithmic boundary trace along the segment.
    Trace(CommonArgs),
}

impl Command {
    fn split(&self) -> (&'static str, &CommonArgs) {
        match self {
            Command::BoundStates(a) => ("bound-states", a),
            Command::Green(a) => ("green", a),
            Command::Verify(a) => ("verify", a),
            Command::Trace(a) => ("trace", a),
        }
    }
}

fn init_thread_pool() {
    if let Ok(spec) = std::env::var("KREIN_LAB_THREADS") {
        if let Ok(n) = spec.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn execute(name: &str, args: &CommonArgs) -> Result<(), CliError> {
    let raw = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let cfg: RunConfig = serde_json::from_str(&raw)
        .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", args.config.display())))?;
    let runner = Runner {
        out_dir: args.out.clone(),
        seed: args.seed,
    };
    runner.run(name, &cfg)
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    let (name, args) = cli.command.split();
    match execute(name, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
