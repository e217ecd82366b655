use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use swarm_infer::harness::output::CHECKPOINT_FILE;
use swarm_infer::harness::{run_sweep, run_to_dir, ExperimentConfig, Mode, Overrides, Solver, SweepKind};
use swarm_infer::Result;

#[derive(Parser)]
#[command(name = "swarm-infer", version, about = "Distributed CNN inference over a UAV swarm")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON experiment config; defaults apply to anything it leaves out.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Built-in network: LeNet, AlexNet or VGG16.
    #[arg(long)]
    network: Option<String>,
    #[arg(long)]
    uavs: Option<usize>,
    /// QoS factor weighting hot-cell visits.
    #[arg(long)]
    sf: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy, then replay the request schedule with it.
    Train {
        #[command(flatten)]
        common: Common,
        /// Environment steps; overrides `train_steps`.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Replay the request schedule with a saved policy.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Policy file; defaults to policy.json in the output directory.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Replay the request schedule with a non-learning solver.
    Baseline {
        #[command(flatten)]
        common: Common,
        /// greedy, random, alternating or oracle.
        #[arg(long, default_value = "greedy")]
        solver: String,
    },
    /// Sweep device speed, memory or swarm size.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// speed, memory or uavs.
        #[arg(long, default_value = "speed")]
        kind: String,
        /// Comma-separated sweep values; defaults depend on the kind.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
    },
    /// Replay with the exhaustive solver (small scenarios only).
    Oracle {
        #[command(flatten)]
        common: Common,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: common.seed,
        output_dir: common.out.clone(),
        network: common.network.clone(),
        uavs: common.uavs,
        qos_factor: common.sf,
    });
    cfg.validate()?;
    Ok(cfg)
}

fn print<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { common, steps } => {
            let mut cfg = load(&common)?;
            if let Some(s) = steps {
                cfg.train_steps = s;
            }
            print(&run_to_dir(&cfg, &Mode::Train)?.report)
        }
        Command::Eval { common, checkpoint } => {
            let cfg = load(&common)?;
            let checkpoint = checkpoint.unwrap_or_else(|| cfg.output_dir.join(CHECKPOINT_FILE));
            print(&run_to_dir(&cfg, &Mode::Eval { checkpoint })?.report)
        }
        Command::Baseline { common, solver } => {
            let cfg = load(&common)?;
            let solver: Solver = solver.parse()?;
            print(&run_to_dir(&cfg, &Mode::Baseline(solver))?.report)
        }
        Command::Oracle { common } => {
            let cfg = load(&common)?;
            print(&run_to_dir(&cfg, &Mode::Baseline(Solver::Oracle))?.report)
        }
        Command::Sweep { common, kind, values } => {
            let cfg = load(&common)?;
            let kind: SweepKind = kind.parse()?;
            let values = if values.is_empty() { kind.default_values() } else { values };
            print(&run_sweep(&cfg, kind, &values)?)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
