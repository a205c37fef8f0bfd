use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "rumdp", version, about = "Nondominated policies and minimax regret for reward-uncertain MDPs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write seeded random instances.
    Generate(GenerateArgs),
    /// Enumerate the nondominated policies of an instance.
    Enumerate(EnumerateArgs),
    /// Solve minimax regret over an enumerated set.
    Regret(RegretArgs),
    /// Check an instance against the exhaustive oracles.
    Verify(VerifyArgs),
    /// Time the methods over a corpus directory.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlphaArg {
    Uniform,
    PointMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolytopeArg {
    Box,
    RandomHalfspaces,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub states: usize,
    #[arg(long)]
    pub actions: usize,
    #[arg(long)]
    pub reward_dim: usize,
    #[arg(long, default_value_t = 0.95)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of instances, seeded `seed, seed + 1, ...`. With more than one,
    /// `-o` names a directory.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Successors per state-action pair; defaults to min(states, 4).
    #[arg(long)]
    pub support: Option<usize>,
    #[arg(long, value_enum, default_value_t = AlphaArg::Uniform)]
    pub alpha: AlphaArg,
    #[arg(long, value_enum, default_value_t = PolytopeArg::Box)]
    pub polytope: PolytopeArg,
    #[arg(long, default_value_t = 1.0)]
    pub halfwidth: f64,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnumMethod {
    Gt,
    PiWitness,
    ApproxGt,
}

impl EnumMethod {
    pub fn name(self) -> &'static str {
        match self {
            EnumMethod::Gt => "gt",
            EnumMethod::PiWitness => "pi-witness",
            EnumMethod::ApproxGt => "approx-gt",
        }
    }
}

#[derive(Debug, Args)]
pub struct EnumerateArgs {
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value_t = EnumMethod::Gt)]
    pub method: EnumMethod,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Approximate traversal: stop after this many lines.
    #[arg(long)]
    pub max_lines: Option<usize>,
    /// Approximate traversal: stop after this many lines in a row add nothing.
    #[arg(long)]
    pub stall_lines: Option<usize>,
    /// Stop after this many milliseconds.
    #[arg(long)]
    pub max_ms: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for the exact traversal; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegretMethod {
    IcgNd,
    XuMannor,
}

impl RegretMethod {
    pub fn name(self) -> &'static str {
        match self {
            RegretMethod::IcgNd => "icg-nd",
            RegretMethod::XuMannor => "xu-mannor",
        }
    }
}

fn positive_f64(text: &str) -> Result<f64, String> {
    let value: f64 = text.parse().map_err(|e| format!("{e}"))?;
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err("tolerance must be positive".into())
    }
}

#[derive(Debug, Args)]
pub struct RegretArgs {
    pub instance: PathBuf,
    /// Dump written by `enumerate`.
    pub gamma: PathBuf,
    #[arg(long, value_enum, default_value_t = RegretMethod::IcgNd)]
    pub method: RegretMethod,
    #[arg(long, default_value_t = rumdp::regret::DEFAULT_TOL, value_parser = positive_f64)]
    pub tol: f64,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, ValueEnum)]
pub enum Check {
    /// Value/occupancy identity, occupancy validity and Bellman slack over
    /// random policies.
    Identity,
    /// Brute force, traversal and witness search agree on Γ.
    Oracles,
    /// Points sampled inside each optimality region re-solve to its policy.
    Regions,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub instance: PathBuf,
    /// Checks to run; all by default.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub checks: Vec<Check>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchMethod {
    Gt,
    PiWitness,
    ApproxGt,
    IcgNd,
    XuMannor,
    BruteForce,
}

impl BenchMethod {
    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::Gt => "gt",
            BenchMethod::PiWitness => "pi-witness",
            BenchMethod::ApproxGt => "approx-gt",
            BenchMethod::IcgNd => "icg-nd",
            BenchMethod::XuMannor => "xu-mannor",
            BenchMethod::BruteForce => "brute-force",
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Directory of instance files (`*.json`).
    pub corpus: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "gt,pi-witness,approx-gt,icg-nd")]
    pub methods: Vec<BenchMethod>,
    #[arg(long, value_delimiter = ',', default_value = "0.10,0.05,0.01")]
    pub error_thresholds: Vec<f64>,
    /// Per (instance, method) time limit.
    #[arg(long, default_value_t = 20 * 60 * 1000)]
    pub timeout_ms: u64,
    /// Directory for `bench.csv` and `scatter.csv`.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Seed for the approximate traversal's lines.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Instances benchmarked concurrently; 0 uses every core.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Write 0 for every wall time, making the output reproducible.
    #[arg(long)]
    pub no_timing: bool,
}
