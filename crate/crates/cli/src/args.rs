use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "parking",
    version,
    about = "Multilayer parking on a one-dimensional lattice: exact densities, simulation and checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact results for the three-site system.
    #[command(subcommand)]
    Analytic(AnalyticCommand),
    /// Monte Carlo estimates of the occupancy per layer.
    Simulate(SimulateArgs),
    /// Brute-force exact computations for small systems.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Runs the cross-checks between the exact formulas, the oracle and the
    /// simulator.
    Verify(VerifyArgs),
}

#[derive(Debug, Subcommand)]
pub enum AnalyticCommand {
    /// Exact end-densities per layer.
    Table(TableArgs),
    /// Centre density against time for selected layers.
    Curve(CurveArgs),
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Highest layer.
    #[arg(long, default_value_t = 10)]
    pub layers: usize,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// Comma-separated layers.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4")]
    pub layers: Vec<usize>,
    /// End of the time grid.
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    pub t_max: f64,
    /// Grid spacing.
    #[arg(long, default_value_t = 0.05, allow_negative_numbers = true)]
    pub t_step: f64,
    /// Explicit comma-separated times, replacing the grid.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with_all = ["t_max", "t_step"])]
    pub times: Option<Vec<f64>>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write a gnuplot script plotting the output file.
    #[arg(long, requires = "output")]
    pub plot_script: Option<PathBuf>,
}

/// Every field is optional so that values from `--config` can fill the
/// gaps; explicit flags win.
#[derive(Debug, Args, Default)]
pub struct SimulateArgs {
    /// Number of lattice sites [default: 3].
    #[arg(long)]
    pub sites: Option<usize>,
    /// Run each replication up to time T.
    #[arg(
        long,
        value_name = "T",
        allow_negative_numbers = true,
        conflicts_with = "arrivals"
    )]
    pub time: Option<f64>,
    /// Run each replication for M arrivals [default: enough to settle the
    /// layer range].
    #[arg(long, value_name = "M")]
    pub arrivals: Option<u64>,
    /// Number of replications [default: 10000].
    #[arg(long)]
    pub reps: Option<u64>,
    /// Record layers 1..=R [default: 10].
    #[arg(long, value_name = "R")]
    pub layers: Option<u32>,
    /// `center` or a comma-separated list of sites [default: center].
    #[arg(long)]
    pub observe: Option<String>,
    /// Random seed [default: $PARKING_SEED, else 42].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for all cores. Never changes the results.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Count arrivals that raise the height (three sites, fixed arrivals).
    #[arg(long)]
    pub raise_stats: bool,
    /// Read parameters from a key=value file, such as a previous manifest.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV output file; standard output when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Manifest file [default: the output path with `.manifest` appended].
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Fail unless the output checksum equals the one recorded in the
    /// `--config` manifest.
    #[arg(long, requires = "config")]
    pub check: bool,
}

#[derive(Debug, Subcommand)]
pub enum OracleCommand {
    /// Exact occupancy of every cell after m uniform arrivals.
    Exact(ExactArgs),
    /// Exact density of one cell at time t.
    Poissonized(PoissonizedArgs),
    /// Exact law of the three-site height after m arrivals.
    HeightDist(HeightDistArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Replay every arrival sequence.
    Enumerate,
    /// Group sequences by the lattice state they reach.
    Dp,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[arg(long, default_value_t = 3)]
    pub sites: usize,
    #[arg(long)]
    pub arrivals: u64,
    #[arg(long, value_enum, default_value_t = Method::Enumerate)]
    pub method: Method,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PoissonizedArgs {
    #[arg(long, default_value_t = 3)]
    pub sites: usize,
    #[arg(long, allow_negative_numbers = true)]
    pub time: f64,
    #[arg(long)]
    pub layer: u32,
    /// Site to evaluate [default: the middle site].
    #[arg(long)]
    pub site: Option<usize>,
    /// Largest arrival count summed over.
    #[arg(long, conflicts_with = "tail")]
    pub m_max: Option<u64>,
    /// Pick the arrival cutoff so that the neglected mass is below this.
    #[arg(long, default_value_t = 1e-12)]
    pub tail: f64,
}

#[derive(Debug, Args)]
pub struct HeightDistArgs {
    #[arg(long)]
    pub arrivals: u64,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Level {
    Quick,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fault {
    /// Perturb the exact end-densities before they are checked.
    EndDensity,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Level::Quick)]
    pub level: Level,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Deliberately break one input to confirm the checks catch it.
    #[arg(long, value_enum, hide = true)]
    pub inject_fault: Option<Fault>,
}
