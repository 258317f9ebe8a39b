//! `htcp`: run one experiment config and write its artifacts.
//!
//! Exit codes: 0 success, 2 a checked tail equivalence failed, 1 computation
//! error (with `error.json`), 64 unusable command line or config.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use htcp_core::checks::CHECKS;
use schemars::schema_for;
use serde_json::json;

use crate::commands::Status;
use crate::config::ExperimentConfig;
use crate::output::{sha256_hex, Artifacts};

const EXIT_COMPUTE: u8 = 1;
const EXIT_VERDICT: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "htcp", version, about = "Compound densities, tail checks and random-walk suprema on grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compound density of a severity family.
    Compound(RunArgs),
    /// One tail check with a verdict.
    Verify(RunArgs),
    /// Supremum law of a negative-drift walk.
    Walk(RunArgs),
    /// Monte Carlo supremum of a negative-drift walk.
    Simulate(RunArgs),
    /// Print the JSON schema of the config, or of one check's params.
    Schema {
        #[arg(long)]
        check: Option<String>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "HTCP_THREADS")]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("htcp: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let (expected, args) = match cli.command {
        Command::Compound(a) => ("compound", a),
        Command::Verify(a) => ("verify", a),
        Command::Walk(a) => ("walk", a),
        Command::Simulate(a) => ("simulate", a),
        Command::Schema { check } => return print_schema(check.as_deref()),
    };
    run(expected, args)
}

fn print_schema(check: Option<&str>) -> ExitCode {
    let schema = match check {
        None => serde_json::to_value(schema_for!(ExperimentConfig)),
        Some(name) => match CHECKS.get(name) {
            Ok(entry) => serde_json::to_value((entry.params_schema)()),
            Err(e) => return usage(e),
        },
    };
    println!("{}", serde_json::to_string_pretty(&schema.expect("schema serializes")).unwrap());
    ExitCode::SUCCESS
}

fn run(expected: &'static str, args: RunArgs) -> ExitCode {
    let bytes = match fs::read(&args.config) {
        Ok(b) => b,
        Err(e) => return usage(format!("cannot read {}: {e}", args.config.display())),
    };
    let config: ExperimentConfig = match serde_json::from_slice(&bytes) {
        Ok(c) => c,
        Err(e) => return usage(format!("invalid config: {e}")),
    };
    if config.command() != expected {
        return usage(format!(
            "config is for `{}` but `{expected}` was invoked",
            config.command()
        ));
    }
    let Some(out) = args.out.clone().or_else(|| config.output_dir().cloned()) else {
        return usage("no output directory: pass --out or set output_dir");
    };
    let prepared = match config.prepare() {
        Ok(p) => p,
        Err(e) => return usage(format!("invalid config: {e}")),
    };
    if let Some(n) = args.threads {
        if n == 0 {
            return usage("--threads must be at least 1");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("thread pool already configured: {e}");
        }
    }

    let mut art = match Artifacts::create(&out, expected, sha256_hex(&bytes)) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("htcp: cannot create {}: {e}", out.display());
            return ExitCode::from(EXIT_COMPUTE);
        }
    };
    let code = match commands::run(prepared, &mut art, args.seed) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::VerdictFailed) => ExitCode::from(EXIT_VERDICT),
        Err(e) => {
            eprintln!("htcp: {e}");
            let report = json!({ "code": e.code(), "message": e.to_string() });
            if let Err(io) = art.write_json("error.json", &report) {
                eprintln!("htcp: cannot write error.json: {io}");
            }
            ExitCode::from(EXIT_COMPUTE)
        }
    };
    if let Err(e) = art.finish() {
        eprintln!("htcp: cannot write manifest: {e}");
        return ExitCode::from(EXIT_COMPUTE);
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;
    use htcp_core::checks::build_check;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn check_names_have_schemas() {
        for name in CHECKS.names() {
            assert!(build_check(name, &json!({"bogus": 1})).is_err(), "{name}");
        }
    }
}
