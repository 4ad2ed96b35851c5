//! `reachplan`: plan, simulate and analyse stochastic reaching movements.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical
//! non-convergence (output files are still written).

mod commands;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use reachplan::config::load_config;
use reachplan::ExperimentConfig;

use commands::{Context, PolicyChoice};
use output::{Failure, Outputs, Status};

#[derive(Debug, Parser)]
#[command(name = "reachplan", version, about = "Plan, simulate and analyse stochastic reaching movements")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file; built-in defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config file and REACHPLAN_OUT_DIR).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every random draw (default: rollout.seed from the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel work; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize one reach and write plan.csv / plan.svg.
    Plan {
        /// Goal centre, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        goal: Option<Vec<f64>>,
    },
    /// Plan, then execute the plan open loop under motor noise.
    Rollout {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        goal: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Movement time over a width × distance grid and its Fitts fit.
    Fitts {
        #[arg(long, value_delimiter = ',')]
        widths: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        distances: Option<Vec<f64>>,
        /// Noisy trials per cell; 0 measures the mean plan.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Infer the goal of a noiseless reach from one observed state.
    Estimate {
        /// Goal the observed reach aims at (default: the prior centre).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        true_goal: Option<Vec<f64>>,
        /// Observation time [s].
        #[arg(long)]
        t_obs: Option<f64>,
    },
    /// Transition-point data, model fitting and prediction.
    Transition {
        #[command(subcommand)]
        action: TransitionCmd,
    },
    /// Simulated human-robot co-manipulation.
    Scenario {
        #[command(subcommand)]
        kind: ScenarioCmd,
    },
}

#[derive(Debug, Subcommand)]
enum TransitionCmd {
    /// Simulation-derived training data (transition_data.csv).
    Generate {
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Fit the GP to a CSV with columns norm_distance,width,transition_distance.
    Fit {
        #[arg(long)]
        data: PathBuf,
    },
    /// Predict transition distances on a grid of goal distances and widths.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Goal distances [m]; normalized by plant.arm_length.
        #[arg(long, value_delimiter = ',', required = true)]
        distance: Vec<f64>,
        /// Goal widths [m].
        #[arg(long, value_delimiter = ',', required = true)]
        width: Vec<f64>,
    },
}

#[derive(Debug, Subcommand)]
enum ScenarioCmd {
    /// The robot infers the human's goal and tracks it along its stiff axes.
    Sync {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        true_goal: Option<Vec<f64>>,
        #[arg(long)]
        t_obs: Option<f64>,
    },
    /// The robot leads, then hands authority to the human.
    Handover {
        /// high_stiff, switch_90, switch_60, switch_opt or all.
        #[arg(long, default_value = "switch_opt")]
        policy: PolicyChoice,
        /// Fitted transition model; generated from the config when absent.
        #[arg(long)]
        model: Option<PathBuf>,
        /// True goal minus the robot's believed goal [m].
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        goal_offset: Option<Vec<f64>>,
    },
}

fn run(cli: Cli) -> Result<Status, Failure> {
    let cfg = match &cli.common.config {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(j) = cli.common.jobs {
        // Only fails when a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global();
    }
    let out = Outputs::new(&cfg, cli.common.out.as_deref())?;
    let seed = cli.common.seed.unwrap_or(cfg.rollout.seed);
    let ctx = Context { cfg, out, seed };
    match &cli.command {
        Command::Plan { goal } => commands::plan(&ctx, goal.as_deref()),
        Command::Rollout { goal, trials } => commands::rollout_cmd(&ctx, goal.as_deref(), *trials),
        Command::Fitts { widths, distances, trials } => {
            commands::fitts(&ctx, widths.as_deref(), distances.as_deref(), *trials)
        }
        Command::Estimate { true_goal, t_obs } => commands::estimate(&ctx, true_goal.as_deref(), *t_obs),
        Command::Transition { action } => match action {
            TransitionCmd::Generate { trials } => commands::transition_generate(&ctx, *trials),
            TransitionCmd::Fit { data } => commands::transition_fit(&ctx, data),
            TransitionCmd::Predict { model, distance, width } => {
                commands::transition_predict(&ctx, model, distance, width)
            }
        },
        Command::Scenario { kind } => match kind {
            ScenarioCmd::Sync { true_goal, t_obs } => commands::scenario_sync_cmd(&ctx, true_goal.as_deref(), *t_obs),
            ScenarioCmd::Handover { policy, model, goal_offset } => {
                commands::scenario_handover_cmd(&ctx, *policy, model.as_deref(), goal_offset.as_deref())
            }
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(s) if s.converged => {
            println!("status: ok ({})", s.note);
            ExitCode::SUCCESS
        }
        Ok(s) => {
            println!("status: not converged ({})", s.note);
            ExitCode::from(2)
        }
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
