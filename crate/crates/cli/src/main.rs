//! `coopcr` command-line driver.
//!
//! Exit codes: 0 success, 1 configuration error (or a failed `verify`
//! check), 2 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coopcr::harness::{emit_plot_data, run_experiment, run_verification, ExperimentConfig, HarnessError, VerifyOptions};

#[derive(Parser)]
#[command(name = "coopcr", version, about = "Cooperative OFDMA cognitive radio experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo sweep and write results.csv, realizations.csv and
    /// metadata.json.
    ///
    /// Any config key can be overridden with `--set dotted.key=value` or an
    /// environment variable such as COOPCR_SCENARIO__NUM_SUBCARRIERS=32
    /// (prefix COOPCR_, `__` between path segments). Flags win over the
    /// environment, which wins over the file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        realizations: Option<usize>,
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Cross-check the solvers against brute-force oracles on small inputs.
    Verify {
        #[arg(long, default_value_t = VerifyOptions::default().subproblems)]
        subproblems: usize,
        #[arg(long, default_value_t = VerifyOptions::default().small_instances)]
        instances: usize,
        #[arg(long, default_value_t = VerifyOptions::default().seed)]
        seed: u64,
    },
    /// Turn a results CSV into one whitespace-separated series file per
    /// (figure, scheme).
    Plotdata {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    match cli.command {
        Command::Run {
            config,
            mut set,
            out,
            seed,
            realizations,
            parallel,
        } => {
            set.extend(seed.map(|v| format!("seed={v}")));
            set.extend(realizations.map(|v| format!("realizations={v}")));
            set.extend(parallel.map(|v| format!("parallel={v}")));
            let cfg = ExperimentConfig::load(&config, std::env::vars(), &set)?;
            let summary = run_experiment(&cfg, &out)?;
            println!(
                "wrote {} rows to {}",
                summary.rows.len(),
                summary.results_csv.display()
            );
            Ok(true)
        }
        Command::Verify {
            subproblems,
            instances,
            seed,
        } => {
            let checks = run_verification(&VerifyOptions {
                subproblems,
                small_instances: instances,
                seed,
            });
            let mut ok = true;
            for c in &checks {
                ok &= c.passed();
                println!(
                    "{} {}: {}/{} failed; worst: {}",
                    if c.passed() { "PASS" } else { "FAIL" },
                    c.name,
                    c.failures,
                    c.total,
                    c.detail
                );
            }
            Ok(ok)
        }
        Command::Plotdata { input, out } => {
            for p in emit_plot_data(&input, &out)? {
                println!("{}", p.display());
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    // clap would exit with 2 on bad arguments; keep 2 for I/O errors.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
