//! Batch driver for `cqsm-core`: JSON run configurations in, JSON and CSV out.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

use std::path::Path;

use serde::Serialize;

use config::{Command, RunConfig};
use error::CliError;

#[derive(Debug, Serialize)]
pub struct ErrorRecord {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
}

/// Structured result; deterministic for a fixed configuration and seed.
/// Wall-clock timing is written separately to `timing.json`.
#[derive(Debug, Serialize)]
pub struct RunResult {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_hash: String,
    pub config: RunConfig,
    pub payload: Option<serde_json::Value>,
    pub error: Option<ErrorRecord>,
}

/// Runs `cmd` and assembles the result record; the exit code is 0 on success.
pub fn execute(cmd: Command, cfg: &RunConfig) -> (RunResult, Vec<output::CsvTable>, i32) {
    let outcome = match cfg.command {
        Some(c) if c != cmd => Err(CliError::Validation(format!(
            "command: config is for `{}`, invoked as `{}`",
            c.name(),
            cmd.name()
        ))),
        _ => run::run(cmd, cfg),
    };
    let (payload, tables, err) = match outcome {
        Ok(o) => (Some(o.payload), o.tables, o.failure),
        Err(e) => (None, vec![], Some(e)),
    };
    let code = err.as_ref().map_or(0, CliError::exit_code);
    let result = RunResult {
        tool: "cqsm",
        version: env!("CARGO_PKG_VERSION"),
        command: cmd.name(),
        config_hash: cfg.hash(),
        config: cfg.clone(),
        payload,
        error: err.map(|e| ErrorRecord {
            kind: e.kind(),
            message: e.to_string(),
            exit_code: e.exit_code(),
        }),
    };
    (result, tables, code)
}

/// Writes `result.json`, the CSV tables (if enabled) and `timing.json`.
pub fn write_outputs(
    dir: &Path,
    result: &RunResult,
    tables: &[output::CsvTable],
    wall_seconds: f64,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("result.json"), output::to_json(result))?;
    if result.config.output.csv {
        for t in tables {
            t.write(dir)?;
        }
    }
    let timing = serde_json::json!({ "wall_seconds": wall_seconds });
    std::fs::write(dir.join("timing.json"), output::to_json(&timing))
}
