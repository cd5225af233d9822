//! Batch front-end: load system definitions, run simulate / analyze /
//! dualize / realize, emit trajectories and reports.
//!
//! Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 theorem-hypothesis
//! violation.

mod commands;
mod config;
mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use chronoctl_core::error::Error as CoreError;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Hypothesis(String),
}

impl CliError {
    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numeric(m) | CliError::Hypothesis(m) => m,
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Hypothesis(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Numerical(_) | CoreError::Eval(_) => CliError::Numeric(e.to_string()),
            CoreError::Hypothesis(_) => CliError::Hypothesis(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TestKind {
    Controllability,
    Observability,
    Both,
}

#[derive(Parser)]
#[command(
    name = "chronoctl",
    version,
    about = "Backward linear control systems on time scales"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the initial value problem and write the trajectory as CSV.
    Simulate {
        /// System definition (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Trajectory CSV path.
        #[arg(long)]
        output: PathBuf,
        /// Include wall time in the confirmation line.
        #[arg(long)]
        timing: bool,
    },
    /// Run controllability and observability tests and print a JSON report.
    Analyze {
        /// System definition (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Which property to test.
        #[arg(long, value_enum)]
        test: TestKind,
        /// Test point for the time-varying rank tests (exact time value).
        #[arg(long)]
        sc: Option<String>,
        /// Derivative order for the time-varying rank tests (default
        /// min(3, n-1)).
        #[arg(long)]
        r: Option<usize>,
        /// Also write the report to this path.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Include wall time in the report (breaks byte-determinism).
        #[arg(long)]
        timing: bool,
    },
    /// Write the dual system definition.
    Dualize {
        /// System definition (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Dual system definition path.
        #[arg(long)]
        output: PathBuf,
    },
    /// Check minimality and factor the sampled weighting pattern.
    Realize {
        /// System definition (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Relative tolerance for the separable rank cut (default 1e-8).
        #[arg(long)]
        tol: Option<f64>,
        /// Write the factor pair to PREFIX_h.csv and PREFIX_f.csv.
        #[arg(long, value_name = "PREFIX")]
        factors_out: Option<PathBuf>,
        /// Also write the report to this path.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Include wall time in the report (breaks byte-determinism).
        #[arg(long)]
        timing: bool,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            config,
            output,
            timing,
        } => commands::cmd_simulate(&config, &output, timing),
        Command::Analyze {
            config,
            test,
            sc,
            r,
            output,
            timing,
        } => commands::cmd_analyze(&config, test, sc.as_deref(), r, output.as_deref(), timing),
        Command::Dualize { config, output } => commands::cmd_dualize(&config, &output),
        Command::Realize {
            config,
            tol,
            factors_out,
            output,
            timing,
        } => commands::cmd_realize(
            &config,
            tol,
            factors_out.as_deref(),
            output.as_deref(),
            timing,
        ),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.exit_code());
    }
}
