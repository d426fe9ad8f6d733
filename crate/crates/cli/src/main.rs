//! `trident`: batch front end for the geometric-control toolkit.
//!
//! Exit codes: 0 when every check passes, 1 on a failed check or internal
//! error, 2 on invalid input or a violated precondition.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trident::{Chart, Error};

#[derive(Parser)]
#[command(name = "trident", version, about = "Geometric control of the (4,7) trident mechanism")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Growth vector, det Ḡ, dynamic pair and Pfaffian signature at a point.
    Controllability(ControllabilityArgs),
    /// Integrate a normal extremal and export it as CSV.
    Geodesic(GeodesicArgs),
    /// Periodic inputs on (X1, X_i) for the nilpotent and original systems.
    BracketMotion(BracketMotionArgs),
    /// so(3) relations, symmetry conditions, w-algebra closure, left invariance.
    SymmetryCheck(SymmetryCheckArgs),
}

#[derive(Args)]
struct Common {
    /// Seven comma-separated coordinates in the chart given by --chart.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    point: Option<Vec<f64>>,
    /// Chart of --point (and of trajectory output).
    #[arg(long, default_value = "original")]
    chart: Chart,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ControllabilityArgs {
    #[command(flatten)]
    common: Common,
    /// Relative singular-value cutoff for rank decisions.
    #[arg(long = "tol-rank", default_value_t = trident::system::RANK_TOL)]
    tol_rank: f64,
    /// Additionally test this many random valid configurations.
    #[arg(long, default_value_t = 0)]
    sweep: usize,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("initial").required(true).args(["constants", "example", "momenta"]))]
struct GeodesicArgs {
    #[command(flatten)]
    common: Common,
    /// JSON file with C5, C6, C7, C11, C12, C13, C14, C15.
    #[arg(long)]
    constants: Option<PathBuf>,
    /// Built-in worked example 1, 2 or 3.
    #[arg(long)]
    example: Option<u8>,
    /// Initial momenta h1..h7.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    momenta: Option<Vec<f64>>,
    #[arg(long, default_value_t = trident::pmp::DEFAULT_DT)]
    dt: f64,
    #[arg(long = "T", default_value_t = 2.0 * std::f64::consts::PI)]
    t_end: f64,
    /// Extremal solver: rk4 or closed-form.
    #[arg(long, default_value = "rk4")]
    solver: String,
    /// Rescale (h1..h4) to unit length first.
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct BracketMotionArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "A", default_value_t = 0.4)]
    amplitude: f64,
    #[arg(long, default_value_t = 2.0 * std::f64::consts::PI / 50.0)]
    omega: f64,
    /// Partner field index 2, 3 or 4.
    #[arg(long, default_value_t = 2)]
    partner: usize,
    #[arg(long, default_value_t = 1)]
    cycles: u32,
    /// Also report the original-vs-nilpotent error for A, A/2, A/4, A/8.
    #[arg(long)]
    sweep: bool,
}

#[derive(Args)]
struct SymmetryCheckArgs {
    #[command(flatten)]
    common: Common,
    /// Scale v1's ℓ3 component by (1 + δ) before checking.
    #[arg(long, allow_hyphen_values = true)]
    perturb: Option<f64>,
    /// Random (g, p) pairs per field in the left-invariance suite.
    #[arg(long, default_value_t = 200)]
    samples: usize,
}

/// A failure together with its exit code.
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_)
            | Error::SingularConfiguration(_)
            | Error::ZeroHorizontalMomentum
            | Error::ZeroCombination
            | Error::ChartMismatch { .. }
            | Error::UnknownStrategy { .. }
            | Error::Csv(_)
            | Error::Json(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Controllability(a) => commands::controllability(&a),
        Command::Geodesic(a) => commands::geodesic(&a),
        Command::BracketMotion(a) => commands::bracket_motion(&a),
        Command::SymmetryCheck(a) => commands::symmetry_check(&a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
