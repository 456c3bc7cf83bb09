//! Command-line front end for the `kyorbit` pipeline.

mod commands;
mod config;
mod error;
mod svg;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{CommonArgs, GridArgs, RunConfig};
use error::CliError;

/// Periodic orbits of x'(t) = f(x(t), x(t-1)) for even-odd symmetric f with monotone delayed feedback.
///
/// Worker threads default to the number of cores; set KYORBIT_THREADS to cap them.
/// Exit codes: 0 success, 1 validation failure, 2 numerical failure, 3 usage error.
#[derive(Debug, Parser)]
#[command(name = "kyorbit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check symmetry and feedback of the nonlinearity and print the report.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sample the period map and write periodmap.csv (and periodmap.svg).
    Periodmap {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Also write the two-panel SVG figure.
        #[arg(long)]
        svg: bool,
    },
    /// Solve for the orbit amplitudes; write orbits.json and one t,x CSV per orbit.
    Orbits {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Samples per exported orbit.
        #[arg(long, default_value_t = 512)]
        resolution: usize,
    },
    /// Check the delay-equation residual and planar symmetries of every orbit.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Floquet spectrum of every orbit, cross-checked against its Morse index.
    Floquet {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// History mesh size N of the discretization.
        #[arg(long, default_value_t = 200)]
        mesh: usize,
        /// Also compute the half-period spectrum.
        #[arg(long)]
        half: bool,
        /// Multipliers with modulus above 1 + eps count as unstable.
        #[arg(long)]
        eps_spec: Option<f64>,
    },
    /// Integrate the delay equation from a history and write simulation.csv.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Constant history value (default 0.5).
        #[arg(long, conflicts_with = "history_expr")]
        history: Option<f64>,
        /// History as an expression in `theta` on [-1, 0].
        #[arg(long)]
        history_expr: Option<String>,
        /// End time.
        #[arg(long, default_value_t = 100.0)]
        tmax: f64,
        /// History mesh size.
        #[arg(long, default_value_t = 64)]
        history_mesh: usize,
        /// Output sample spacing.
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
    },
    /// Hopf points and saddle-node candidates along x' = alpha f.
    Bifurcate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 0.1)]
        alpha_lo: f64,
        #[arg(long, default_value_t = 10.0)]
        alpha_hi: f64,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("KYORBIT_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::usage(format!("KYORBIT_THREADS = `{value}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let no_grid = GridArgs::default();
    match cli.command {
        Command::Validate { common } => commands::validate(&RunConfig::resolve(&common, &no_grid)?),
        Command::Periodmap { common, grid, svg } => commands::periodmap(&RunConfig::resolve(&common, &grid)?, svg),
        Command::Orbits { common, grid, resolution } => {
            commands::orbits(&RunConfig::resolve(&common, &grid)?, resolution.max(2))
        }
        Command::Verify { common, grid } => commands::verify(&RunConfig::resolve(&common, &grid)?),
        Command::Floquet { common, grid, mesh, half, eps_spec } => {
            commands::floquet(&RunConfig::resolve(&common, &grid)?, mesh, half, eps_spec)
        }
        Command::Simulate { common, history, history_expr, tmax, history_mesh, dt } => commands::simulate(
            &RunConfig::resolve(&common, &no_grid)?,
            commands::SimulateArgs {
                history,
                history_expr: history_expr.as_deref(),
                t_max: tmax,
                mesh: history_mesh,
                dt,
            },
        ),
        Command::Bifurcate { common, grid, alpha_lo, alpha_hi } => {
            commands::bifurcate(&RunConfig::resolve(&common, &grid)?, alpha_lo, alpha_hi)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kyorbit: error {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
