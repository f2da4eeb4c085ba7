//! `replan`: plan, simulate, generate datasets, train, evaluate and rerun
//! the whole replanning-benefit pipeline.

mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use replan_core::Error;

const EXIT_HELP: &str = "\
Exit codes:
  0  success
  1  usage error or invalid configuration
  2  missing/unreadable file or malformed input
  3  planner failure (timeout, node limit, infeasible)
  4  scenario failure (execution, obstacle sampling, instance generation)
  5  training failure";

#[derive(Parser, Debug)]
#[command(name = "replan", version, about = "Replanning-benefit experiments for MAPF plan execution", after_help = EXIT_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct PlannerArgs {
    /// Planner high-level node limit (count)
    #[arg(long, default_value_t = 100_000)]
    node_limit: usize,
    /// Planner wall-clock timeout (seconds)
    #[arg(long, default_value_t = 60.0)]
    timeout_s: f64,
    /// Solver runtime charged per low-level expansion (seconds)
    #[arg(long, default_value_t = 1e-6)]
    seconds_per_expansion: f64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random instance on a map and solve it optimally
    Plan {
        /// MovingAI map file
        #[arg(long)]
        map: std::path::PathBuf,
        /// Number of agents (count)
        #[arg(long)]
        agents: usize,
        /// Instance seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output solution file
        #[arg(long)]
        out: std::path::PathBuf,
        #[command(flatten)]
        planner: PlannerArgs,
    },
    /// Execute a solution with an optional obstacle and replanning
    Simulate {
        /// Solution file written by `plan`
        #[arg(long)]
        sol: std::path::PathBuf,
        /// Map file; defaults to the one recorded in the solution file
        #[arg(long)]
        map: Option<std::path::PathBuf>,
        /// Seed for sampling the dynamic obstacle; no obstacle when absent
        #[arg(long)]
        obstacle_seed: Option<u64>,
        /// Replanning time (seconds); no replanning when absent
        #[arg(long)]
        replan_t: Option<f64>,
        /// Trace output file; printed to standard output when absent
        #[arg(long)]
        trace: Option<std::path::PathBuf>,
        #[command(flatten)]
        planner: PlannerArgs,
    },
    /// Generate the labeled dataset CSV from a config file
    GenDataset {
        /// Config file (key = value)
        #[arg(long)]
        config: std::path::PathBuf,
        /// Output CSV; failures go to <out stem>.failures.csv
        #[arg(long)]
        out: std::path::PathBuf,
        /// Worker threads (count, 0 = all cores); output does not depend on it
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Train the regressor on a dataset CSV
    Train {
        /// Training dataset CSV
        #[arg(long)]
        data: std::path::PathBuf,
        /// Output model file
        #[arg(long)]
        out: std::path::PathBuf,
        /// Config file with train.* keys; defaults when absent
        #[arg(long)]
        config: Option<std::path::PathBuf>,
        /// Training seed; overrides train.seed
        #[arg(long)]
        seed: Option<u64>,
        /// Also run k-fold cross-validation with this many folds (count)
        #[arg(long)]
        cv_folds: Option<usize>,
    },
    /// Write the decision report and figure CSVs for a test set
    Evaluate {
        /// Model file
        #[arg(long)]
        model: std::path::PathBuf,
        /// Test dataset CSV
        #[arg(long)]
        data: std::path::PathBuf,
        /// Output directory
        #[arg(long)]
        out_dir: std::path::PathBuf,
        /// Decision threshold (seconds)
        #[arg(long, default_value_t = 1.0)]
        tau: f64,
    },
    /// Permutation importance of every feature on a test set
    Importance {
        /// Model file
        #[arg(long)]
        model: std::path::PathBuf,
        /// Test dataset CSV
        #[arg(long)]
        data: std::path::PathBuf,
        /// Output CSV
        #[arg(long)]
        out: std::path::PathBuf,
        /// Shuffles per feature (count)
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        /// Shuffle seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Dataset generation, split, training and evaluation in one go
    Repro {
        /// Config file (key = value)
        #[arg(long)]
        config: std::path::PathBuf,
        /// Output directory
        #[arg(long)]
        out_dir: std::path::PathBuf,
        /// Worker threads (count, 0 = all cores)
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invalid(_) => 1,
        Error::Io { .. } | Error::Parse { .. } | Error::Csv(_) => 2,
        Error::Planner(_) => 3,
        Error::Scenario(_) | Error::Sampling(_) | Error::Generation(_) | Error::Adg(_) => 4,
        Error::Training(_) => 5,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
