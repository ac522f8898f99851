//! `evcs-ph`: validate, simulate, compare and design from scenario files.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod compare;
mod design;
mod record;
mod simulate;
mod validate;

#[derive(Parser)]
#[command(name = "evcs-ph", version, about = "Port-Hamiltonian EV charging station simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Settling,
    Overshoot,
    Distance,
}

#[derive(clap::Args, Clone, Debug)]
pub struct RunOpts {
    /// Output directory for CSV files and run records.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Run twice and fail unless both runs are byte-identical.
    #[arg(long)]
    pub seedless: bool,
    /// Override the switching frequency in Hz.
    #[arg(long)]
    pub fsw: Option<f64>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Build the model, check its structure and print the steady state and
    /// closed-loop spectrum. With `--record`, re-verify a stored run instead.
    Validate {
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, conflicts_with = "scenario")]
        record: Option<PathBuf>,
    },
    /// Run a scenario and write `<name>.csv` and `<name>.record.json`.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Compare one quantity between two CSV runs.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        quantity: String,
        #[arg(long, value_enum, default_value = "distance")]
        metric: Metric,
        /// Reference for settling and overshoot; defaults to each run's final value.
        #[arg(long, allow_negative_numbers = true)]
        reference: Option<f64>,
        /// Settling band; defaults to 1 % of the reference.
        #[arg(long)]
        band: Option<f64>,
        /// Only samples at or after this time count for settling.
        #[arg(long, default_value_t = 0.0)]
        after: f64,
    },
    /// Rank condition, Bass design and gain recommendations.
    Design {
        #[arg(long, required_unless_present = "system")]
        scenario: Option<PathBuf>,
        /// Linearized system file with `[A]`, `[D]` and optional `[R]` blocks.
        #[arg(long, conflicts_with = "scenario")]
        system: Option<PathBuf>,
        /// Also compute the Bass gain.
        #[arg(long)]
        bass: bool,
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Run several scenarios concurrently, each into its own outputs.
    Batch {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[command(flatten)]
        opts: RunOpts,
    },
}

/// A failed certificate or check detected by the CLI itself.
#[derive(Debug)]
pub struct CheckFailed(pub String);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for CheckFailed {}

/// 1 validation or certificate failure, 2 solver failure, 3 I/O.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    use evcs_ph::Error as E;
    for cause in e.chain() {
        if let Some(le) = cause.downcast_ref::<E>() {
            return match le {
                E::Io(_) => 3,
                E::EigenNoConvergence { .. }
                | E::SpectrumCollision(_)
                | E::NewtonNoConvergence { .. }
                | E::SingularJacobian(_)
                | E::StepUnderflow { .. }
                | E::NonFinite { .. }
                | E::Singular(_) => 2,
                _ => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 1;
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Validate { scenario: Some(s), .. } => validate::run(&s),
        Command::Validate { record: Some(r), .. } => validate::verify_record(&r),
        Command::Validate { .. } => Err(CheckFailed("validate needs --scenario or --record".into()).into()),
        Command::Simulate { scenario, opts } => simulate::run(&scenario, &opts).map(|r| println!("{}", r.summary())),
        Command::Compare { a, b, quantity, metric, reference, band, after } => {
            compare::run(&a, &b, &quantity, metric, reference, band, after)
        }
        Command::Design { scenario, system, bass, alpha } => match (scenario, system) {
            (_, Some(sys)) => design::run_system(&sys, alpha),
            (Some(s), None) => design::run_scenario(&s, bass, alpha),
            (None, None) => unreachable!("clap enforces one of --scenario/--system"),
        },
        Command::Batch { scenarios, opts } => simulate::batch(&scenarios, &opts),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
