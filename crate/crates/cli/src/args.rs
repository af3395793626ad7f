use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use freearm::walker::{Boundary, WeaveModel};
use freearm::GateOrder;

/// Seed used when neither `--seed` nor `FREEARM_SEED` is given.
pub const DEFAULT_SEED: u64 = 20_050_101;

#[derive(Debug, Parser)]
#[command(
    name = "freearm",
    version,
    about = "Resource formulas, Monte Carlo and protocol verification for free-arm linked-state optical quantum computing"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub threads: Option<u16>,
    #[arg(long, global = true, env = "FREEARM_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BoundaryArg {
    Bulk,
    Floor,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Boundary {
        match b {
            BoundaryArg::Bulk => Boundary::Bulk,
            BoundaryArg::Floor => Boundary::Floor,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum WeaveModelArg {
    FullCzRetry,
    IndependentSides,
}

impl From<WeaveModelArg> for WeaveModel {
    fn from(m: WeaveModelArg) -> WeaveModel {
        match m {
            WeaveModelArg::FullCzRetry => WeaveModel::FullCzRetry,
            WeaveModelArg::IndependentSides => WeaveModel::IndependentSides,
        }
    }
}

fn parse_order(s: &str) -> Result<GateOrder, String> {
    let v: u32 = s.trim().parse().map_err(|e| format!("{s:?}: {e}"))?;
    GateOrder::new(v).map_err(|e| e.to_string())
}

/// Gate orders given as `2`, `1-5` (inclusive) or `1,2,4`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderList(pub Vec<GateOrder>);

pub fn parse_orders(s: &str) -> Result<OrderList, String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (parse_order(a)?, parse_order(b)?);
                if a > b {
                    return Err(format!("empty range {part:?}"));
                }
                for v in a.get()..=b.get() {
                    out.push(GateOrder::new(v).map_err(|e| e.to_string())?);
                }
            }
            None => out.push(parse_order(part)?),
        }
    }
    Ok(OrderList(out))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact closed-form resource table.
    Analytic {
        /// Chain-growth gate orders, e.g. `2`, `1-5` or `2,3`.
        #[arg(long, default_value = "1-6", value_parser = parse_orders)]
        n: OrderList,
        /// Weaving gate orders.
        #[arg(long, default_value = "2", value_parser = parse_orders)]
        m: OrderList,
    },
    /// Monte Carlo of free-armed chain growth.
    Walk(WalkArgs),
    /// Monte Carlo of weaving two chains.
    Weave {
        #[arg(long, default_value = "2", value_parser = parse_order)]
        m: GateOrder,
        #[arg(long, value_enum, default_value_t = WeaveModelArg::FullCzRetry)]
        model: WeaveModelArg,
        /// Number of weaves.
        #[arg(long, default_value_t = 1_000_000)]
        count: u64,
    },
    /// Monte Carlo of cluster-chain growth by four-photon units.
    Cluster(WalkArgs),
    /// Weave two fresh links and check every measurement branch.
    VerifyWeave,
    /// Run programs through chains and compare every branch to the ideal circuit.
    VerifyEvolve(EvolveArgs),
    /// Exact Fock-space check of the `CZ_(n)` gate.
    FockCz {
        #[arg(long, default_value = "2", value_parser = parse_order)]
        n: GateOrder,
    },
}

#[derive(Debug, Args)]
pub struct WalkArgs {
    #[arg(long, default_value = "2", value_parser = parse_order)]
    pub n: GateOrder,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value_t = 100)]
    pub target_links: u64,
    /// Per-trial cap on attach attempts.
    #[arg(long, default_value_t = 1_000_000)]
    pub max_steps: u64,
    #[arg(long, value_enum, default_value_t = BoundaryArg::Bulk)]
    pub boundary: BoundaryArg,
    /// Also write per-trial and aggregate records here: JSON lines, or one
    /// aggregate CSV row when the path ends in `.csv`.
    #[arg(long)]
    pub records: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    /// Program file (JSON). Without it, random programs are generated.
    #[arg(long)]
    pub program: Option<PathBuf>,
    /// Random programs to generate (seeds `seed`, `seed+1`, ...).
    #[arg(long, default_value_t = 10, conflicts_with = "program")]
    pub programs: u64,
    #[arg(long, default_value_t = 3)]
    pub qubits: usize,
    #[arg(long, default_value_t = 3)]
    pub cphases: usize,
    /// Links per chain.
    #[arg(long, default_value_t = 4)]
    pub links: usize,
    /// Follow this many sampled branches instead of enumerating all.
    #[arg(long)]
    pub sample: Option<u64>,
}
