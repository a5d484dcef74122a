//! Command-line front end: `fbms run`, `fbms list`, `fbms bundle`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fbms::harness::{catalog_table, emit_report_bundle, run_scenario, RunOptions};

/// Environment variable overriding every scenario seed.
const SEED_VAR: &str = "FBMS_SEED";

#[derive(Parser)]
#[command(name = "fbms", version, about = "Free boundary minimal surface laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario or batch config (a JSON path or `builtin:<name>`).
    Run {
        config: String,
        /// Scenarios of a batch run concurrently up to this limit.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Output directory.
        #[arg(long, default_value = "fbms-out")]
        out: PathBuf,
    },
    /// List builtin scenarios.
    List,
    /// Pack the outputs of a run into a deterministic archive.
    Bundle { manifest: PathBuf },
}

fn seed_override() -> Result<Option<u64>, String> {
    match std::env::var(SEED_VAR) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| format!("{SEED_VAR} must be an unsigned integer, got `{v}`")),
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            print!("{}", catalog_table());
            ExitCode::SUCCESS
        }
        Command::Run { config, jobs, out } => {
            let seed = match seed_override() {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let options = RunOptions {
                out_dir: out.clone(),
                jobs,
                seed_override: seed,
            };
            match run_scenario(&config, &options) {
                Ok(manifest) => {
                    for s in &manifest.scenarios {
                        let status = if s.passed { "pass" } else { "FAIL" };
                        match &s.failure {
                            Some(f) => println!("{status} {} (stage {}: {})", s.name, f.stage, f.message),
                            None => println!("{status} {}", s.name),
                        }
                    }
                    println!("manifest: {}", out.join(fbms::harness::MANIFEST_NAME).display());
                    if manifest.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::FAILURE
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Bundle { manifest } => match emit_report_bundle(&manifest) {
            Ok(path) => {
                println!("{}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
