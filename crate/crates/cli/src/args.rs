use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use optrack::diagnostics::TrajectoryMetric;
use optrack::solver::DEFAULT_ALPHA;
use optrack::SolverPath;

#[derive(Parser, Debug)]
#[command(
    name = "optrack",
    version,
    about = "Real-time tracking of critical points of parametric multi-convex programs",
    after_help = "Grids take start:stop:step (inclusive) or comma lists. OPTRACK_THREADS caps parallel \
                  experiment cells. Exit codes: 0 ok, 2 usage, 3 numerical failure, 4 I/O."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the tracking iteration over a parameter schedule, or the tracked
    /// DC-motor closed loop.
    Track(TrackArgs),
    /// Solve every step to convergence (the reference solution).
    Oracle(OracleArgs),
    /// Experiment drivers.
    #[command(subcommand)]
    Experiment(Experiment),
}

#[derive(Subcommand, Debug)]
pub enum Experiment {
    /// Closed-loop error against sampling period at a fixed compute budget.
    DtSweep(DtSweepArgs),
    /// Distance to the inner-loop limit against the number of sweeps.
    Rate(RateArgs),
    /// Empirical contraction coefficients over a (rho, M) grid.
    Contraction(ContractionArgs),
    /// Tracked and reference DC-motor closed loops side by side.
    Compare(CompareArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Builtin {
    /// The DC motor NMPC benchmark.
    DcMotor,
    /// min (z1-1)^2 + (z2-1)^2 s.t. z1 z2 = s, z in [0,2]^2.
    Toy,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    /// Speed only.
    Output,
    FullState,
}

impl From<MetricArg> for TrajectoryMetric {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Output => TrajectoryMetric::Output,
            MetricArg::FullState => TrajectoryMetric::FullState,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct SourceArgs {
    /// Builtin model or program.
    #[arg(long, value_enum, conflicts_with = "program")]
    pub builtin: Option<Builtin>,
    /// Program in the JSON interchange format.
    #[arg(long)]
    pub program: Option<PathBuf>,
}

/// Parameter sequence of a program source: a CSV file or a linear drift.
#[derive(Args, Debug, Clone)]
pub struct ScheduleArgs {
    /// CSV with one parameter vector per row; an optional header is skipped.
    #[arg(long, conflicts_with_all = ["s0", "ds"])]
    pub params: Option<PathBuf>,
    /// First parameter of a linear drift (comma list).
    #[arg(long, allow_hyphen_values = true)]
    pub s0: Option<String>,
    /// Parameter change per step of the drift (comma list).
    #[arg(long, allow_hyphen_values = true)]
    pub ds: Option<String>,
}

/// Closed-loop timing of the DC motor; `--steps` also sets the drift length
/// of program sources.
#[derive(Args, Debug, Clone)]
pub struct TimeArgs {
    /// Sampling period in seconds.
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    /// Number of steps.
    #[arg(long, conflicts_with = "duration")]
    pub steps: Option<usize>,
    /// Simulated time in seconds (DC motor; default 4).
    #[arg(long)]
    pub duration: Option<f64>,
    /// Prediction horizon (DC motor; default about 0.26 s of preview).
    #[arg(long)]
    pub horizon: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long, default_value = "optrack-out")]
    pub out: PathBuf,
    /// Record wall-clock solve times (makes outputs run-dependent).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Args, Debug, Clone)]
pub struct TrackArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    pub time: TimeArgs,
    /// Penalty parameter.
    #[arg(long)]
    pub rho: f64,
    /// Sweeps per time step.
    #[arg(long = "M", default_value_t = 30)]
    pub m: usize,
    /// Proximal weight of every block.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value = "lifted")]
    pub path: SolverPath,
    /// The tracker starts at this multiple of the first reference solution.
    #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
    pub warm_scale: f64,
    /// Half-width of a seeded uniform perturbation of the warm start
    /// (program sources).
    #[arg(long, default_value_t = 0.0)]
    pub perturb: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance of the reference solve that provides the warm start.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Also write the per-sweep log (program sources).
    #[arg(long)]
    pub sweeps: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone)]
pub struct OracleArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    #[command(flatten)]
    pub time: TimeArgs,
    /// KKT residual at which a step counts as solved.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Penalty of the first attempt.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Dual updates per attempt.
    #[arg(long)]
    pub max_outer: Option<usize>,
    /// Attempts with a tenfold penalty after a failed one.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Disable the Newton phase.
    #[arg(long)]
    pub no_newton: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone)]
pub struct DtSweepArgs {
    /// Block updates per second of simulated time.
    #[arg(long, default_value_t = 5000.0)]
    pub budget: f64,
    /// Sampling periods.
    #[arg(long, default_value = "0.005:0.03:0.001")]
    pub dt: String,
    /// Simulated time in seconds.
    #[arg(long, default_value_t = 4.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 50.0)]
    pub rho: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value = "lifted")]
    pub path: SolverPath,
    #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
    pub warm_scale: f64,
    #[arg(long, value_enum, default_value_t = MetricArg::Output)]
    pub metric: MetricArg,
    /// Reference solver tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone)]
pub struct RateArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Sweep counts, strictly increasing.
    #[arg(long = "M", default_value = "1,2,5,10,20,50")]
    pub m: String,
    #[arg(long, default_value_t = 10.0)]
    pub rho: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Parameter (comma list; toy default 1, otherwise zero).
    #[arg(long, allow_hyphen_values = true)]
    pub s: Option<String>,
    /// Multiplier held fixed (comma list; default zero).
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<String>,
    /// Starting point (comma list; default a seeded random point in the sets).
    #[arg(long, allow_hyphen_values = true)]
    pub z0: Option<String>,
    /// Sampling period of the DC-motor horizon program.
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone)]
pub struct ContractionArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// Length of the drift.
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    /// Penalty grid.
    #[arg(long, default_value = "10")]
    pub rho: String,
    /// Sweep grid.
    #[arg(long = "M", default_value = "20")]
    pub m: String,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value = "lifted")]
    pub path: SolverPath,
    #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
    pub warm_scale: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Args, Debug, Clone)]
pub struct CompareArgs {
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long, default_value_t = 4.0)]
    pub duration: f64,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, default_value_t = 50.0)]
    pub rho: f64,
    #[arg(long = "M", default_value_t = 30)]
    pub m: usize,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value = "lifted")]
    pub path: SolverPath,
    #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
    pub warm_scale: f64,
    #[arg(long, value_enum, default_value_t = MetricArg::Output)]
    pub metric: MetricArg,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}
