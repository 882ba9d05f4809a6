use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qtomo_runner::{compare_runs, run, schema, RunConfig, RunReport, RunnerError, EXIT_CHECK_FAILED, EXIT_INVALID_INPUT, EXIT_PASS};

#[derive(Parser)]
#[command(name = "qtomo", version, about = "Run and compare phase-space tomography experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces every seed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare two reports record by record.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        rtol: f64,
    },
    /// Print the config schema.
    Schema,
}

fn execute(cli: Cli) -> Result<u8, RunnerError> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg = cfg.with_seed(s);
            }
            let dir = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("qtomo-out"));
            let report = run(&cfg, &dir)?;
            for r in &report.records {
                let value = r.value.map_or_else(|| "error".to_string(), |v| format!("{v:.3e}"));
                let status = if r.pass { "ok  " } else { "FAIL" };
                println!("{status} {:<36} {value:>12} (tol {:.1e})", r.name, r.tolerance);
            }
            println!("report written to {}", dir.join("report.json").display());
            Ok(if report.passed() { EXIT_PASS } else { EXIT_CHECK_FAILED })
        }
        Command::Compare { a, b, rtol } => {
            let cmp = compare_runs(&RunReport::load(&a)?, &RunReport::load(&b)?, rtol)?;
            println!("{}", serde_json::to_string_pretty(&cmp).expect("comparison serializes"));
            Ok(if cmp.is_consistent() { EXIT_PASS } else { EXIT_CHECK_FAILED })
        }
        Command::Schema => {
            println!("{}", serde_json::to_string_pretty(&schema()).expect("schema serializes"));
            Ok(EXIT_PASS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INVALID_INPUT)
        }
    }
}
