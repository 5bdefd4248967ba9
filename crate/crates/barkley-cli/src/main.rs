//! `barkley`: command-line front end for the traveling-wave toolkit.

mod commands;
mod config;

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use barkley_core::BarkleyError;
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::ConfigFile;

#[derive(Debug, Parser)]
#[command(name = "barkley", version, about = "Traveling waves of the Barkley pipe-flow model")]
struct Cli {
    /// Keyed config file with `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for randomized perturbations.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equilibria and branch roots of the critical manifold.
    Equilibria(EquilibriaArgs),
    /// Spectra of the laminar and turbulent states.
    Spectra(SpectraArgs),
    /// Melnikov integrals over a grid of r, as CSV.
    MelnikovScan(ScanArgs),
    /// Edge of the double-twist regime.
    FindBeta(BetaArgs),
    /// Hypothesis verdict at one parameter point.
    Verify(VerifyArgs),
    /// Numerical front or back connection.
    Shoot(ShootArgs),
    /// Continuation of the heteroclinic loop in eps.
    Continue(ContinueArgs),
    /// Return times and small-eigenvalue predictions of an N-front.
    NfrontTimes(NFrontArgs),
    /// Direct simulation of the PDE with snapshot output.
    Simulate(SimulateArgs),
    /// Measured front or back speed against the shooting speed.
    Speed(SpeedArgs),
}

#[derive(Debug, Args)]
struct EquilibriaArgs {
    #[arg(long)]
    r: Option<f64>,
}

#[derive(Debug, Args)]
struct SpectraArgs {
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Diffusion rate; defaults to the singular value D0(r).
    #[arg(long = "D")]
    d: Option<f64>,
    /// Defaults to the singular value mu0(r).
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    c: Option<f64>,
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[arg(long = "r-min")]
    r_min: Option<f64>,
    #[arg(long = "r-max")]
    r_max: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BetaArgs {
    /// Bisection tolerance in r.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    c: Option<f64>,
    /// Print the verdict as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SideArg {
    Front,
    Back,
}

#[derive(Debug, Args)]
struct ShootArgs {
    #[arg(long, value_enum)]
    side: Option<SideArg>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Writes the trajectory as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ContinueArgs {
    #[arg(long)]
    r: Option<f64>,
    /// Comma separated, strictly descending.
    #[arg(long = "eps-list")]
    eps_list: Option<String>,
}

#[derive(Debug, Args)]
struct NFrontArgs {
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Laminar,
    Turbulent,
    Front,
    Back,
    Nfront,
}

impl std::str::FromStr for KindArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BoundaryArg {
    Periodic,
    Outflow,
}

impl std::str::FromStr for BoundaryArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

impl std::str::FromStr for SideArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Domain length.
    #[arg(long = "L")]
    l: Option<f64>,
    /// Grid points.
    #[arg(long)]
    n: Option<usize>,
    /// Simulated time.
    #[arg(long = "T")]
    t: Option<f64>,
    #[arg(long = "snap-every")]
    snap_every: Option<f64>,
    /// Directory for the snapshot files.
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
    /// Diffusion rate; defaults to D0(r).
    #[arg(long = "D")]
    d: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    zeta: Option<f64>,
    /// Position of the first interface.
    #[arg(long)]
    x0: Option<f64>,
    /// Number of fronts of an N-front profile.
    #[arg(long = "N")]
    n_fronts: Option<usize>,
    /// Gap between consecutive interfaces of an N-front profile.
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long, value_enum)]
    bc: Option<BoundaryArg>,
    /// Amplitude of seeded uniform noise added to q.
    #[arg(long)]
    noise: Option<f64>,
}

#[derive(Debug, Args)]
struct SpeedArgs {
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    zeta: Option<f64>,
    #[arg(long = "L")]
    l: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long = "T")]
    t: Option<f64>,
    /// Tracked level as a fraction of the turbulent plateau.
    #[arg(long)]
    level: Option<f64>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(BarkleyError),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Core(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<BarkleyError> for CliError {
    fn from(e: BarkleyError) -> Self {
        CliError::Core(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let seed = cli.seed.unwrap_or(commands::DEFAULT_SEED);
    match cli.command {
        Command::Equilibria(a) => commands::equilibria(&file, a, out),
        Command::Spectra(a) => commands::spectra(&file, a, out),
        Command::MelnikovScan(a) => commands::melnikov_scan(&file, a, out),
        Command::FindBeta(a) => commands::find_beta(&file, a, out),
        Command::Verify(a) => commands::verify(&file, a, out),
        Command::Shoot(a) => commands::shoot(&file, a, out),
        Command::Continue(a) => commands::continuation(&file, a, out),
        Command::NfrontTimes(a) => commands::nfront_times(&file, a, out),
        Command::Simulate(a) => commands::simulate(&file, a, seed, out),
        Command::Speed(a) => commands::speed(&file, a, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = dispatch(cli, &mut out).and_then(|()| out.flush().map_err(CliError::from));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
