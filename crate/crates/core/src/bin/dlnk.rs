use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dlnk::cli::commands::{run, Command, Invocation};

#[derive(Parser)]
#[command(name = "dlnk", version, about = "Exact finite-width Bayesian deep linear networks")]
struct Args {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration (optional for `verify`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also run the brute-force weight-space comparison (predict).
    #[arg(long)]
    oracle: bool,
}

#[derive(Subcommand)]
enum Sub {
    /// Compare the Wishart-mixture and weight-space prior samplers.
    SamplePrior(Common),
    /// Posterior predictive at the test inputs.
    Predict(Common),
    /// Bayesian model evidence (FC, D = 1).
    Evidence(Common),
    /// Rate-function minimizers, concentration and scalar saddle.
    Ldp(Common),
    /// Run the oracle-equivalence suite and print a pass/fail table.
    Verify(Common),
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = dlnk::cli::CliError::config(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
    };
    let (command, c) = match args.command {
        Sub::SamplePrior(c) => (Command::SamplePrior, c),
        Sub::Predict(c) => (Command::Predict, c),
        Sub::Evidence(c) => (Command::Evidence, c),
        Sub::Ldp(c) => (Command::Ldp, c),
        Sub::Verify(c) => (Command::Verify, c),
    };
    let inv = Invocation {
        command,
        config: c.config,
        seed: c.seed,
        threads: c.threads,
        out: c.out,
        oracle: c.oracle,
    };
    match run(&inv) {
        Ok(outcome) => {
            if let Some(text) = &outcome.text {
                print!("{text}");
            } else if inv.out.is_none() && outcome.report.config.get("out").is_none_or(|v| v.is_null()) {
                println!("{}", outcome.report.to_json());
            }
            match outcome.failure {
                Some(e) => {
                    eprintln!("{}", e.to_json());
                    ExitCode::from(e.exit_code() as u8)
                }
                None => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
