//! `reachset`: reachable-set bounds and state-engineering simulations for
//! coherently controlled relaxing spin systems.

mod commands;
mod model;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use model::ModelArgs;

#[derive(Debug, Parser)]
#[command(name = "reachset", version, about = "Reachable-set bounds for controlled open quantum systems")]
struct Cli {
    /// Worker threads for ray tracing, grids and multi-starts.
    #[arg(long, global = true, env = "REACHSET_WORKERS")]
    workers: Option<usize>,
    /// Scale of the equilibrium polarization (the generator is given in units of ε).
    #[arg(long, global = true, default_value_t = 1.0)]
    epsilon: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Purity sphere that contains every reachable state.
    Bound(BoundArgs),
    /// Boundary of the small-time locally controllable region along rays.
    Stlc(StlcArgs),
    /// Best transfer coefficient achievable with unitary control alone.
    UnitaryBound(UnitaryArgs),
    /// Periodic relaxation/permutation sequence and its fixed point.
    Simulate(SimulateArgs),
    /// Steady state under continuous saturation of one spin.
    Noe(NoeArgs),
    /// Fixed-point error of the PPS sequence under pulse miscalibration.
    Robustness(RobustnessArgs),
    /// Least-squares fit of one block of relaxation rates.
    Fit(FitArgs),
    /// Synthetic block trajectory from a rate set.
    Synth(SynthArgs),
    /// Export the assembled generator as JSON.
    Generator(GeneratorArgs),
    /// Plot-ready data for the sphere, STLC boundary, polytope and trajectories.
    Figure1(Figure1Args),
}

#[derive(Debug, Args, Serialize)]
pub struct BoundArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Cross-check the solution with a multi-start gradient oracle.
    #[arg(long)]
    pub certify: bool,
    #[arg(long, default_value_t = 50)]
    pub starts: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct StlcArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Ray set, `fibonacci:<count>`.
    #[arg(long, default_value = "fibonacci:200")]
    pub rays: String,
    /// Bisection tolerance on the boundary radius.
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    /// Ray origin in diagonal coordinates `x1,x2,x3`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub origin: Option<Vec<f64>>,
    /// Marching step; defaults to 1% of the purity-sphere radius.
    #[arg(long)]
    pub step: Option<f64>,
    /// Only keep rays in the sector `0 <= x3 <= x1 <= x2`.
    #[arg(long)]
    pub region: Option<Region>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    /// The sector `0 <= x3 <= x1 <= x2`.
    Paper,
}

#[derive(Debug, Args, Serialize)]
pub struct UnitaryArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// `pps`, `bell`, or a coherence-vector JSON file.
    #[arg(long, default_value = "pps")]
    pub target: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// `pps` for `[τ − V]`, `bell` for `[W − τ − V − Wᵀ]`.
    #[arg(long, default_value = "pps")]
    pub seq: String,
    #[arg(long, default_value_t = 1.5)]
    pub tau: f64,
    /// Number of periods.
    #[arg(long, default_value_t = 500)]
    pub m: usize,
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    /// Initial state: `eq` or `zero`.
    #[arg(long, default_value = "eq")]
    pub start: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct NoeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Saturated spin, `C` or `H`.
    #[arg(long, default_value = "C")]
    pub saturate: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RobustnessArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Relative angle errors `lo:hi:count`, applied to both channels.
    #[arg(long, default_value = "-0.1:0.1:21", allow_hyphen_values = true)]
    pub grid: String,
    #[arg(long, default_value_t = 1.5)]
    pub tau: f64,
    /// J coupling for the gate decomposition when the model has no rate set.
    #[arg(long)]
    pub j_hz: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// `population`, `carbon-coherence`, `proton-coherence` or `zero-double-quantum`.
    #[arg(long)]
    pub block: String,
    /// Trajectory CSV `t,<label>,...`; repeat for several initial states.
    #[arg(long, required = true)]
    pub traj: Vec<PathBuf>,
    /// Starting rate set; defaults to the chloroform rates.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Rate set; defaults to the chloroform rates.
    #[arg(long)]
    pub rates: Option<PathBuf>,
    #[arg(long)]
    pub block: String,
    /// Initial values of the block observables, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub initial: Vec<f64>,
    /// Sample times `t0:t1:count`.
    #[arg(long, default_value = "0:100:101")]
    pub times: String,
    /// Gaussian noise, as a fraction of the largest observed magnitude.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct GeneratorArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct Figure1Args {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "figure1_data")]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "fibonacci:200")]
    pub rays: String,
    #[arg(long, default_value_t = 1e-3)]
    pub tol: f64,
    #[arg(long, default_value_t = 1.5)]
    pub tau: f64,
    #[arg(long, default_value_t = 100)]
    pub m: usize,
    /// Only keep rays in the sector `0 <= x3 <= x1 <= x2`.
    #[arg(long)]
    pub region: Option<Region>,
}

fn run(cli: Cli) -> reachset::Result<()> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(reachset::Error::Validation("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| reachset::Error::Numerical(format!("cannot start worker pool: {e}")))?;
    }
    let eps = cli.epsilon;
    match cli.command {
        Command::Bound(a) => commands::bound(&a, eps),
        Command::Stlc(a) => commands::stlc(&a, eps),
        Command::UnitaryBound(a) => commands::unitary(&a, eps),
        Command::Simulate(a) => commands::simulate(&a, eps),
        Command::Noe(a) => commands::noe(&a, eps),
        Command::Robustness(a) => commands::robustness(&a, eps),
        Command::Fit(a) => commands::fit(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Generator(a) => commands::generator(&a, eps),
        Command::Figure1(a) => commands::figure1(&a, eps),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}
