//! Command-line front end for the incident-response simulator: scenario
//! generation, policy training and evaluation, the nine-cell benchmark
//! sweep, and static metric plots.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod plot;
mod runs;

use runs::{EvalRun, ScenarioChoice, SweepRun, TrainRun};

#[derive(Parser)]
#[command(name = "edei", version, about = "Emergency decision-making simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Built-in scenario: storage, factory, airport, storage-reduced.
    #[arg(long, conflicts_with = "scenario_file")]
    scenario: Option<String>,
    /// Load a scenario file instead of generating a built-in one.
    #[arg(long)]
    scenario_file: Option<PathBuf>,
    /// Number of response agents.
    #[arg(long)]
    agents: Option<u32>,
    /// Number of initial incidents.
    #[arg(long)]
    incidents: Option<u32>,
    /// Shrink to the 12-node two-agent profile for quick runs.
    #[arg(long)]
    reduced: bool,
}

impl ScenarioArgs {
    fn choice(&self) -> ScenarioChoice {
        ScenarioChoice {
            kind: self.scenario.clone(),
            file: self.scenario_file.clone(),
            agents: self.agents,
            incidents: self.incidents,
            reduced: self.reduced,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the nine benchmark scenario files.
    Gen {
        /// Output directory.
        #[arg(long, default_value = "scenarios")]
        out: PathBuf,
        /// Master seed for generated placements.
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Train a policy and write metrics plus a checkpoint.
    Train {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Policy to train.
        #[arg(long, value_parser = ["maddpg", "pmaddpg"])]
        policy: String,
        /// Training episodes.
        #[arg(long, default_value_t = 2000)]
        episodes: u32,
        /// Master seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory.
        #[arg(long, default_value = "runs/train")]
        out: PathBuf,
        /// Also write per-step trace CSVs.
        #[arg(long)]
        trace: bool,
    },
    /// Evaluate a policy and write metrics.
    Eval {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Policy to evaluate.
        #[arg(long, value_parser = ["greedy", "random", "maddpg", "pmaddpg"])]
        policy: String,
        /// Checkpoint file for trained policies.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Evaluation episodes.
        #[arg(long, default_value_t = 20)]
        episodes: u32,
        /// Master seed.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory.
        #[arg(long, default_value = "runs/eval")]
        out: PathBuf,
        /// Also write per-step trace CSVs.
        #[arg(long)]
        trace: bool,
    },
    /// Run one policy across all nine benchmark cells in parallel.
    Sweep {
        /// Policy to run in every cell.
        #[arg(long, value_parser = ["greedy", "random", "maddpg", "pmaddpg"])]
        policy: String,
        /// Episodes per cell (training episodes for trained policies).
        #[arg(long, default_value_t = 20)]
        episodes: u32,
        /// Master seed; each cell derives its own stream.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Output directory; each cell gets a subdirectory.
        #[arg(long, default_value = "runs/sweep")]
        out: PathBuf,
        /// Use the reduced training profile in every cell.
        #[arg(long)]
        reduced: bool,
    },
    /// Render metric curves from metrics CSV files to one SVG figure.
    Plot {
        /// Metrics CSV files to draw, one curve set per file.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Output SVG file.
        #[arg(long, default_value = "plot.svg")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen { out, seed } => runs::run_gen(&out, seed),
        Command::Train { scenario, policy, episodes, seed, out, trace } => {
            runs::run_train(&TrainRun {
                choice: scenario.choice(),
                predict: policy == "pmaddpg",
                episodes,
                seed,
                out,
                trace,
            })
        }
        Command::Eval { scenario, policy, checkpoint, episodes, seed, out, trace } => {
            runs::run_eval(&EvalRun {
                choice: scenario.choice(),
                policy,
                checkpoint,
                episodes,
                seed,
                out,
                trace,
            })
        }
        Command::Sweep { policy, episodes, seed, out, reduced } => {
            runs::run_sweep(&SweepRun { policy, episodes, seed, out, reduced })
        }
        Command::Plot { inputs, out } => plot::run_plot(&inputs, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
