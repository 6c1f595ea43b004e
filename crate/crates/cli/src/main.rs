//! `bochner`: curvature operators, pinching checks, Feynman–Kac runs and
//! Hodge spectra from the command line.
//!
//! Exit codes: 0 success, 1 a mathematical check failed, 2 bad input,
//! 3 curvature tensor failed validation, 4 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod output;

#[derive(Debug)]
pub enum CliError {
    /// A check that should hold as a theorem did not.
    Check(String),
    Input(String),
    Core(bochner_core::Error),
}

impl From<bochner_core::Error> for CliError {
    fn from(e: bochner_core::Error) -> Self {
        Self::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use bochner_core::Error;
        match self {
            Self::Check(_) => 1,
            Self::Input(_) => 2,
            Self::Core(Error::Domain(_) | Error::Parse(_)) => 2,
            Self::Core(Error::Validation(_)) => 3,
            Self::Core(Error::Numeric(_)) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Check(m) => write!(f, "check failed: {m}"),
            Self::Input(m) => write!(f, "input error: {m}"),
            Self::Core(e) => write!(f, "{e}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "bochner", version, about = "Weitzenböck operators, pinching and Feynman–Kac estimators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Assemble ℛ^p for a tensor file and summarize its spectrum.
    Rp(RpArgs),
    /// Extremize the sectional sum over frames and test the pinching criterion.
    Pinch(PinchArgs),
    /// Report on the product of a surface of curvature −a with the unit 4-sphere.
    Example(ExampleArgs),
    /// Decay rate of the Feynman–Kac functional and the implied spectral bound.
    Ssp(StochasticArgs),
    /// Feynman–Kac mean at the horizon, with its decay curve.
    Fk(FkArgs),
    /// Damped parallel flow W_t along Brownian paths and its scalar bound.
    Wflow(StochasticArgs),
    /// Spectral gaps and Betti numbers of a simplicial complex.
    Hodge(HodgeArgs),
    /// Perron eigenvalues of the multi-index overlap matrices.
    Lemma32(Lemma32Args),
}

#[derive(Args, Debug)]
struct RpArgs {
    /// Curvature tensor JSON.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    p: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PinchArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = bochner_core::pinching::DEFAULT_RESTARTS)]
    restarts: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExampleArgs {
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long, default_value_t = bochner_core::pinching::DEFAULT_RESTARTS)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StochasticArgs {
    /// Run configuration JSON; the flags below override its fields.
    #[arg(long)]
    input: PathBuf,
    #[arg(long = "T")]
    horizon: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "N")]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the decay curve as CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FkArgs {
    #[command(flatten)]
    common: StochasticArgs,
    /// Also estimate the time integral of the functional over [0, ∞).
    #[arg(long)]
    integral: bool,
    /// Tail tolerance for --integral.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Args, Debug)]
struct HodgeArgs {
    /// Complex JSON `{ "vertices", "maximal_simplices" }`.
    #[arg(long, conflicts_with = "vertices")]
    input: Option<PathBuf>,
    /// Build a random clique complex on this many vertices instead.
    #[arg(long, requires = "seed")]
    vertices: Option<usize>,
    /// Edge probability for the random graph.
    #[arg(long, default_value_t = 0.5)]
    prob: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Lemma32Args {
    /// Check all dimensions up to this one.
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Rp(a) => commands::rp(&a.input, a.p, a.output.as_deref()),
        Command::Pinch(a) => commands::pinch(&a.input, a.p, a.restarts, a.seed, a.output.as_deref()),
        Command::Example(a) => commands::example(a.a, a.restarts, a.seed, a.output.as_deref()),
        Command::Ssp(a) => commands::ssp(&a.into()),
        Command::Fk(a) => commands::fk(&a.common.into(), a.integral, a.tol),
        Command::Wflow(a) => commands::wflow(&a.into()),
        Command::Hodge(a) => {
            commands::hodge(a.input.as_deref(), a.vertices, a.prob, a.seed, a.output.as_deref())
        }
        Command::Lemma32(a) => commands::lemma32(a.n, a.output.as_deref()),
    }
}

impl From<StochasticArgs> for commands::StochasticRequest {
    fn from(a: StochasticArgs) -> Self {
        Self {
            input: a.input,
            horizon: a.horizon,
            dt: a.dt,
            paths: a.paths,
            seed: a.seed,
            p: a.p,
            output: a.output,
            csv: a.csv,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bochner: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
