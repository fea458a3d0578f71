mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::{Failure, StartArg};

#[derive(Parser)]
#[command(name = "combwalk", version, about = "Random walks and their collisions on wedge combs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Overrides the master seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: COMBWALK_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Collision verdict for a height profile.
    Classify(ProfileArgs),
    /// Simulate walkers and dump trajectories or meetings.
    Simulate(SimulateArgs),
    /// Exact finite-chain quantities.
    Exact {
        #[command(subcommand)]
        quantity: ExactCmd,
    },
    /// Monte Carlo estimate from an experiment config.
    Estimate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a config template over a grid of patches.
    Sweep {
        /// JSON object `{"template": <config>, "grid": [<patch>, ...]}`.
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the acceptance criteria.
    Acceptance {
        /// `fast` or `full`.
        suite: String,
        /// Run only these criteria.
        #[arg(long = "only")]
        only: Vec<u8>,
    },
}

#[derive(Args, Clone, Debug)]
pub struct ProfileArgs {
    /// Profile JSON file.
    #[arg(long, conflicts_with = "family")]
    pub config: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,

    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,

    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,

    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Constant,
    Power,
    Linlog,
    Nlogn,
}

#[derive(Args, Clone, Debug)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,

    /// Start vertex `x,y`; repeat for more walkers.
    #[arg(long = "start", allow_hyphen_values = true)]
    pub starts: Vec<StartArg>,

    #[arg(long)]
    pub horizon: Option<u64>,
}

#[derive(Subcommand, Clone, Debug)]
pub enum ExactCmd {
    /// P(hit 2v before 0 from 1) on a path.
    GamblerRuin {
        #[arg(long)]
        v: i64,
        #[arg(long)]
        rational: bool,
    },
    /// Expected meetings H in a tooth of height h from (u,0), (u,v).
    ToothH {
        #[arg(long)]
        h: i64,
        #[arg(long)]
        v: i64,
        #[arg(long)]
        rational: bool,
    },
    /// Bracket on P(Psi_0) with the comb truncated at |x| <= l.
    Psi0 {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
        u: i64,
        #[arg(long)]
        v: i64,
        #[arg(long)]
        l: u64,
    },
    /// P(two walkers meet before either reaches |x| >= radius).
    CollisionBeforeExit {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long = "start", allow_hyphen_values = true, num_args = 1)]
        starts: Vec<StartArg>,
        #[arg(long)]
        radius: u64,
    },
    /// Return probabilities q_{2n} at spine vertex x for n <= n_max.
    ReturnProbabilities {
        #[command(flatten)]
        profile: ProfileArgs,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
        x: i64,
        #[arg(long)]
        n_max: u64,
    },
    /// Heat-kernel decay on LinLog(beta) at t = n^3 log^beta n.
    KernelDecay {
        #[arg(long)]
        beta: f64,
        #[arg(long)]
        n: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = commands::Ctx { out: cli.out, format: cli.format, seed: cli.seed, threads: cli.threads };
    let result = match cli.cmd {
        Cmd::Classify(p) => commands::classify(&ctx, &p),
        Cmd::Simulate(s) => commands::simulate(&ctx, &s),
        Cmd::Exact { quantity } => commands::exact(&ctx, &quantity),
        Cmd::Estimate { config } => commands::estimate(&ctx, &config),
        Cmd::Sweep { config } => commands::sweep(&ctx, &config),
        Cmd::Acceptance { suite, only } => commands::acceptance(&ctx, &suite, &only),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(match Failure::of(&e) {
                Failure::Usage => 2,
                Failure::Statistical => 3,
                Failure::Other => 1,
            })
        }
    }
}
