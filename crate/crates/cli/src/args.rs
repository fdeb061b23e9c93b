use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "metastable", version, about = "Landscape, Markov-chain and simulation analysis of metastable diffusions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Critical points, wells, gates and Eyring–Kramers constants -> landscape.json
    Analyze(Flags),
    /// Auxiliary and limiting chains from landscape.json -> chains.json
    Chains(ChainFlags),
    /// Transition ensembles and the order process -> eps_<ε>/{transitions.csv, orderpath.csv, summary.json}
    Simulate(Flags),
    /// Property checks -> testfn_report.json, verify.json
    Verify(Flags),
    /// analyze, chains, simulate and verify in sequence
    All(Flags),
}

#[derive(Debug, Clone, Args)]
pub struct ChainFlags {
    /// Output directory holding landscape.json
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct Flags {
    /// Potential specification (TOML)
    #[arg(long)]
    pub spec: PathBuf,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Comma-separated ε values; defaults to the spec's list
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    /// Trajectories per ensemble
    #[arg(long, default_value_t = 200)]
    pub traj: usize,
    /// Base seed; defaults to the spec's seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Order-process horizon in units of θ_ε
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Saddle-box size multiplier
    #[arg(long = "J", default_value_t = metastable::testfn::DEFAULT_J)]
    pub j: f64,
    /// Run the quadrature checks (Laplace asymptotics, test-function residual)
    #[arg(long)]
    pub quadrature: bool,
    /// Euler–Maruyama step; defaults to min(1e-3, 0.1/λ_max)
    #[arg(long)]
    pub dt: Option<f64>,
    /// Per-trajectory step budget; components whose predicted transition time exceeds it are skipped
    #[arg(long, default_value_t = 1_000_000_000)]
    pub max_steps: u64,
}
