use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use torsionlab_cli::{run, CliError, Command, RunConfig};

/// Torsion forms and adiabatic-limit verification runs.
///
/// Exit codes: 0 success, 1 I/O or schema error, 2 validation or acceptance
/// failure, 3 dimension cap exceeded. TORSIONLAB_THREADS caps parallelism.
#[derive(Debug, Parser)]
#[command(name = "torsionlab", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Flat complex spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

fn threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("TORSIONLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("TORSIONLAB_THREADS must be a positive integer, got {value:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = threads().and_then(|_| {
        let mut config = RunConfig::from_file(&args.config)?;
        if let Some(seed) = args.seed {
            config.seed = seed;
        }
        run(args.command, &args.spec, &config, &args.out)
    });
    match result {
        Ok(outcome) => {
            println!("{}: {}", if outcome.passed { "ok" } else { "FAILED" }, outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::from(if outcome.passed { 0 } else { 2 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
