use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use pmelab_cli::{execute, parse_config, CliError};

/// Run a pmelab experiment described by a TOML configuration file.
#[derive(Parser, Debug)]
#[command(name = "pmelab", version)]
struct Args {
    /// Configuration file.
    config: PathBuf,
    /// Exit with status 3 when an acceptance threshold is missed.
    #[arg(long)]
    assert: bool,
    /// Directory for relative output paths (overrides PMELAB_OUTPUT_DIR).
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker thread cap for sweeps (overrides PMELAB_THREADS).
    #[arg(long)]
    threads: Option<usize>,
}

fn run(args: &Args) -> Result<bool, CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::ConfigRead {
        path: args.config.clone(),
        source,
    })?;
    let cfg = parse_config(&text)?;

    let threads = match args.threads {
        Some(n) => Some(n),
        None => match std::env::var("PMELAB_THREADS") {
            Ok(v) => Some(v.parse().map_err(|_| {
                CliError::ConfigInvalid(vec![format!("PMELAB_THREADS: expected a positive integer, got {v:?}")])
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = threads.filter(|n| *n > 0) {
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let dir = args
        .output_dir
        .clone()
        .or_else(|| std::env::var_os("PMELAB_OUTPUT_DIR").map(PathBuf::from));
    let output = match dir {
        Some(d) if cfg.output_path.is_relative() => d.join(&cfg.output_path),
        _ => cfg.output_path.clone(),
    };

    let report = execute(&cfg, &output)?;
    println!("{}: wrote {} rows to {}", cfg.command, report.rows, output.display());
    for line in &report.summary {
        println!("  {line}");
    }
    for line in &report.failures {
        println!("  FAIL {line}");
    }
    Ok(report.failures.is_empty())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) if args.assert => ExitCode::from(3),
        Ok(false) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
