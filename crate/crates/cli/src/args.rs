use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "rwre", version, about = "Random walks in Markov-modulated random environments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Args)]
pub struct Common {
    /// TOML model file.
    #[arg(long)]
    pub config: PathBuf,
    /// Master seed; replica `i` uses stream `i` of it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (0 picks the number of CPUs). Never changes results.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// CSV output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    #[value(name = "T")]
    T,
    #[value(name = "X")]
    X,
    #[value(name = "both")]
    Both,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the model assumptions.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Solve for the tail index and print the growth-rate grid.
    Kappa {
        #[command(flatten)]
        common: Common,
    },
    /// Asymptotic speed, with an optional check against R samples.
    Speed {
        #[command(flatten)]
        common: Common,
        /// Draw this many R samples for the cross-check.
        #[arg(long)]
        samples: Option<u64>,
        /// Read R samples (one per line) for the cross-check.
        #[arg(long, conflicts_with = "samples")]
        samples_file: Option<PathBuf>,
        #[arg(long, default_value_t = rwre_core::tails::DEFAULT_TOL)]
        tol: f64,
    },
    /// Annealed hitting times of level n by the stepping walker.
    SimulateWalk {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        n: u64,
        #[arg(long, default_value_t = 1000)]
        replicas: u64,
        #[arg(long, default_value_t = rwre_core::walksim::DEFAULT_STEP_CAP)]
        step_cap: u64,
    },
    /// Branching process with immigration and its common regeneration blocks.
    SimulateBranching {
        #[command(flatten)]
        common: Common,
        /// Generations per replica.
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        #[arg(long, default_value_t = 100)]
        replicas: u64,
    },
    /// Tail of R: Hill estimates, log-log slope and the scaled survival curve.
    Tails {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = rwre_core::tails::DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = rwre_core::limitlaws::DEFAULT_HILL_FRACTION)]
        top_fraction: f64,
        /// Also estimate P(R > threshold) by exponential tilting.
        #[arg(long)]
        threshold: Option<f64>,
        /// Write the raw R samples to this CSV.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Compare normalized hitting times or positions with the stable law.
    LimitCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        n: u64,
        #[arg(long, default_value_t = 10_000)]
        replicas: u64,
        #[arg(long, value_enum, default_value_t = SideArg::T)]
        side: SideArg,
        /// Use the stepping walker instead of the excursion sampler.
        #[arg(long)]
        reference_walk: bool,
        #[arg(long, default_value_t = rwre_core::walksim::DEFAULT_STEP_CAP)]
        step_cap: u64,
    },
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Validate { common }
            | Command::Kappa { common }
            | Command::Speed { common, .. }
            | Command::SimulateWalk { common, .. }
            | Command::SimulateBranching { common, .. }
            | Command::Tails { common, .. }
            | Command::LimitCheck { common, .. } => common,
        }
    }
}
