//! `sail`: generate teacher data, train, evaluate and sweep.
//!
//! Exit codes: 0 success, 2 configuration error, 3 input error,
//! 4 runtime or numeric error.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sail_core::env::EnvName;
use sail_core::experts::ExpertKind;
use sail_core::Error;

use commands::{EvalTarget, Evaluate, GenExperts};
use config::{Agent, Overrides, RunConfig, DEFAULT_EVAL_EPISODES};

#[derive(Parser)]
#[command(
    name = "sail",
    version,
    about = "Imitation from state-only demonstrations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Roll out a scripted controller and write teacher trajectories.
    GenExperts {
        #[arg(long)]
        env: EnvName,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        /// Defaults to the environment's solved level.
        #[arg(long, allow_hyphen_values = true)]
        min_return: Option<f64>,
        #[arg(long)]
        controller: Option<ExpertKind>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train SAIL or a baseline and write models, logs and a run manifest.
    Train(RunArgs),
    /// Evaluate a saved model or the random baseline.
    Evaluate {
        /// Directory written by `train` (`<out>/seed-<s>/model`).
        #[arg(
            long,
            conflicts_with = "baseline",
            required_unless_present = "baseline"
        )]
        model: Option<PathBuf>,
        #[arg(long)]
        baseline: Option<EvalBaseline>,
        #[arg(long)]
        env: Option<EnvName>,
        #[arg(long, visible_alias = "eval-episodes", default_value_t = DEFAULT_EVAL_EPISODES)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Teacher file for the performance reference band.
        #[arg(long)]
        teacher: Option<PathBuf>,
        /// CSV report path; a `.run.json` manifest is written beside it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train once per teacher-set size and write a sample-efficiency table.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Teacher-set sizes, first-N by file order.
        #[arg(long, value_delimiter = ',')]
        counts: Option<Vec<usize>>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalBaseline {
    Random,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    env: Option<EnvName>,
    /// Repeat or comma-separate for several seeds.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    #[arg(long)]
    teacher: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Shorthand for `--agent sail-no-adversarial`.
    #[arg(long)]
    ablation: bool,
    #[arg(long, value_enum)]
    agent: Option<Agent>,
    #[arg(long)]
    eval_episodes: Option<usize>,
}

impl RunArgs {
    fn config(&self) -> sail_core::Result<RunConfig> {
        let base = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        Ok(base.merge(Overrides {
            env: self.env,
            seeds: self.seed.clone(),
            teacher: self.teacher.clone(),
            out: self.out.clone(),
            epochs: self.epochs,
            ablation: self.ablation,
            agent: self.agent,
            eval_episodes: self.eval_episodes,
        }))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::Usage(_) | Error::Io { .. } | Error::Parse { .. } | Error::Validation(_) => 3,
        Error::Shape(_) | Error::Quality(_) | Error::Numeric(_) => 4,
    }
}

fn run(cli: Cli) -> sail_core::Result<()> {
    match cli.command {
        Command::GenExperts {
            env,
            episodes,
            min_return,
            controller,
            out,
            seed,
        } => commands::gen_experts(&GenExperts {
            env,
            episodes,
            min_return,
            controller,
            out,
            seed,
        }),
        Command::Train(args) => commands::train_cmd(&args.config()?, args.config.as_deref()),
        Command::Evaluate {
            model,
            baseline,
            env,
            episodes,
            seed,
            teacher,
            out,
        } => {
            let target = match (model, baseline) {
                (Some(dir), _) => EvalTarget::Model(dir),
                (None, Some(EvalBaseline::Random)) => EvalTarget::Random,
                (None, None) => unreachable!("clap requires one of them"),
            };
            commands::evaluate_cmd(&Evaluate {
                target,
                env,
                episodes,
                seed,
                teacher,
                out,
            })
        }
        Command::Sweep { run, counts } => {
            commands::sweep_cmd(&run.config()?, run.config.as_deref(), counts.as_deref())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SAIL_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
