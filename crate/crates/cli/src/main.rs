use std::path::PathBuf;
use std::process::ExitCode;

use amspace_cli::{resolve, run_scenario, write_outputs, CliError, Formats, Overrides};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "amspace", version, about = "Positive perturbations of shift semigroups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named scenario or a `key = value` config file.
    Run {
        /// example-5-1, periodic-5-2, counterexample-5-3, split-demo, custom, or a config path.
        target: String,
        #[arg(long)]
        n_cells: Option<usize>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Comma-separated subset of json,csv,svg.
        #[arg(long, default_value = "json,csv")]
        format: String,
        /// Evaluate the λ sweep in parallel.
        #[arg(long)]
        parallel: bool,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let Command::Run {
        target,
        n_cells,
        dt,
        lambda,
        tol,
        out,
        format,
        parallel,
    } = cli.command;
    let formats = Formats::parse(&format)?;
    let overrides = Overrides {
        n_cells,
        dt,
        lambda,
        tol,
    };
    let settings = resolve(&target, &overrides)?;
    let mut report = run_scenario(&settings, parallel)?;
    let written = write_outputs(&mut report, &out, formats)?;
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    println!("{}: wrote {} to {}", report.scenario, written.join(", "), out.display());
    if failed.is_empty() {
        println!("all {} checks passed", report.checks.len());
    } else {
        println!("failed checks: {}", failed.join(", "));
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
