use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rpitrack::{cmd_certify, cmd_project, cmd_simulate, cmd_synthesize, GlobalOpts};

#[derive(Parser)]
#[command(name = "rpitrack", version)]
#[command(about = "Synthesize and check polyhedral invariant-set certificates for ramp and sinusoid tracking")]
struct Cli {
    /// Seed of the synthesis restarts (overrides the problem file)
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Convergence tolerance (synthesize), residual tolerance (certify) or
    /// monitor tolerance (simulate)
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Exit with status 5 instead of warning when the reference leaves the certified set
    #[arg(long, global = true)]
    strict: bool,

    /// Directory for certificates, logs, CSV files and run manifests
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search for gains, an invariant polytope and the largest reference set
    Synthesize {
        problem: PathBuf,

        /// Number of restarts (overrides the problem file)
        #[arg(long)]
        restarts: Option<usize>,
    },
    /// Check every relation of a certificate and print the residual table
    Certify { certificate: PathBuf, problem: PathBuf },
    /// Simulate the certified closed loop and write a trajectory CSV
    Simulate {
        problem: PathBuf,
        certificate: PathBuf,

        /// Reference signal spec, e.g. "sinusoid 0.13 1" or "two-tank"
        #[arg(long)]
        signal: Option<String>,

        /// Trajectory CSV path (default: <out-dir>/trajectory.csv)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project the invariant set onto two closed-loop coordinates
    Project {
        certificate: PathBuf,

        /// Coordinate indices to keep
        #[arg(long, num_args = 2, value_names = ["I", "J"], default_values_t = [0, 1])]
        dims: Vec<usize>,

        /// Polygon CSV path (default: <out-dir>/projection-I-J.csv)
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = GlobalOpts { seed: cli.seed, tol: cli.tol, strict: cli.strict, out_dir: cli.out_dir };
    let exit = match &cli.command {
        Command::Synthesize { problem, restarts } => cmd_synthesize(problem, *restarts, &g),
        Command::Certify { certificate, problem } => cmd_certify(certificate, problem, &g),
        Command::Simulate { problem, certificate, signal, out } => {
            cmd_simulate(problem, certificate, signal.as_deref(), out.as_deref(), &g)
        }
        Command::Project { certificate, dims, out } => cmd_project(certificate, (dims[0], dims[1]), out.as_deref(), &g),
    };
    ExitCode::from(exit.code() as u8)
}
