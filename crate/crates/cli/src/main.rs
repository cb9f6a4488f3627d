use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use cqsm_cli::config::{Command, RunConfig};
use cqsm_cli::error::CliError;
use cqsm_cli::{execute, write_outputs};

/// Spectral analysis of Dirac operators with chiral mass terms.
#[derive(Debug, Parser)]
#[command(name = "cqsm", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; falls back to CQSM_THREADS.
    #[arg(long, env = "CQSM_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(t) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("cqsm: cannot configure {t} threads: {e}");
            return ExitCode::from(4);
        }
    }
    let mut cfg = match RunConfig::from_path(&args.config) {
        Ok(c) => c,
        Err(e) => return fail(e),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let start = Instant::now();
    let (result, tables, code) = execute(args.command, &cfg);
    let wall = start.elapsed().as_secs_f64();
    if let Err(e) = write_outputs(&args.out, &result, &tables, wall) {
        return fail(CliError::Internal(format!("writing {}: {e}", args.out.display())));
    }
    summarize(&result);
    println!("wall time {wall:.3} s (timing.json)");
    if let Some(e) = &result.error {
        eprintln!("cqsm: {}", e.message);
    }
    ExitCode::from(code as u8)
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("cqsm: {e}");
    ExitCode::from(e.exit_code() as u8)
}

/// One line per top-level scalar of the payload; every value printed here is
/// also in `result.json`.
fn summarize(result: &cqsm_cli::RunResult) {
    println!("{} (config {})", result.command, &result.config_hash[..12]);
    if let Some(serde_json::Value::Object(map)) = &result.payload {
        for (k, v) in map {
            match v {
                serde_json::Value::Number(_) | serde_json::Value::Bool(_) => {
                    println!("  {k}: {v}")
                }
                serde_json::Value::Null => println!("  {k}: none"),
                _ => {}
            }
        }
    }
}
