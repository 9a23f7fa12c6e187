use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use dsac_core::envs::env_spec;
use dsac_core::harness::{self, Checkpoint, RunConfig};
use dsac_core::replay::{load_demos, save_demos, DemoSet};
use dsac_core::{Error, Result};

/// Imitation-learning lab: expert training, demonstrations, DSAC / SQIL / BC.
#[derive(Parser)]
#[command(name = "dsac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Repeatable `key=value` override applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        for kv in &self.overrides {
            cfg.apply_override(kv)?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train SAC on the true task reward and save a checkpoint.
    TrainExpert {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "runs/expert")]
        out: PathBuf,
    },
    /// Roll out a checkpoint deterministically and save demonstrations.
    RecordDemos {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Number of trajectories.
        #[arg(long, default_value_t = 4)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file.
        #[arg(long, default_value = "demos.json")]
        out: PathBuf,
    },
    /// Run DSAC, SQIL or BC against a demonstration file.
    Imitate {
        #[command(flatten)]
        run: RunArgs,
        /// Demonstration file; falls back to the `demos` config key.
        #[arg(long)]
        demos: Option<PathBuf>,
        #[arg(long, default_value = "runs/imitate")]
        out: PathBuf,
    },
    /// Deterministic rollouts of a checkpoint, or of uniform random actions.
    Evaluate {
        #[arg(long, required_unless_present = "uniform_env")]
        checkpoint: Option<PathBuf>,
        /// Evaluate uniform random actions on this environment instead.
        #[arg(long, conflicts_with = "checkpoint")]
        uniform_env: Option<String>,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the summary to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run `imitate` once per seed in the `seeds` config key and aggregate.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        demos: Option<PathBuf>,
        #[arg(long, default_value = "runs/sweep")]
        out: PathBuf,
        /// Concurrent runs.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Score and reward curves from metrics files.
    Plot {
        /// metrics.csv files.
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
        /// Output stem; writes `<stem>.svg`, `<stem>_rewards.svg`, `<stem>.csv`.
        #[arg(long, default_value = "plot")]
        out: PathBuf,
        /// Horizontal expert line.
        #[arg(long, allow_negative_numbers = true)]
        expert_score: Option<f64>,
    },
}

fn demos_for(cfg: &RunConfig, flag: &Option<PathBuf>) -> Result<DemoSet> {
    let path = flag
        .as_ref()
        .or(cfg.demos.as_ref())
        .ok_or_else(|| Error::Config("missing required key: demos (or pass --demos)".into()))?;
    load_demos(path, Some(&env_spec(cfg.env_name()?)?))
}

fn report_run(out: &Path, o: &harness::RunOutput) {
    if let Some(last) = o.rows.last() {
        info!(
            "final eval at step {}: {:.3} ± {:.3}",
            last.step, last.eval_mean, last.eval_std
        );
    }
    println!("wrote {}", out.display());
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::TrainExpert { run, out } => {
            let cfg = run.resolve()?;
            let o = harness::train_expert(&cfg)?;
            o.write(&out, &cfg)?;
            report_run(&out, &o);
        }
        Command::RecordDemos {
            checkpoint,
            episodes,
            seed,
            out,
        } => {
            let ck = Checkpoint::load(&checkpoint, None)?;
            let set = harness::record_demos(&ck, episodes, seed)?;
            save_demos(&set, &out)?;
            let returns: Vec<String> = set
                .trajectories
                .iter()
                .map(|t| format!("{:.3}", t.env_return))
                .collect();
            println!(
                "wrote {} trajectories to {} (returns {})",
                set.trajectories.len(),
                out.display(),
                returns.join(", ")
            );
        }
        Command::Imitate { run, demos, out } => {
            let cfg = run.resolve()?;
            let set = demos_for(&cfg, &demos)?;
            let o = harness::imitate(&cfg, &set)?;
            o.write(&out, &cfg)?;
            report_run(&out, &o);
        }
        Command::Evaluate {
            checkpoint,
            uniform_env,
            episodes,
            seed,
            out,
        } => {
            let summary = match (checkpoint, uniform_env) {
                (Some(p), _) => harness::evaluate(&Checkpoint::load(&p, None)?, episodes, seed)?,
                (None, Some(env)) => harness::evaluate_uniform(&env, episodes, seed)?,
                (None, None) => unreachable!("clap requires one of the two"),
            };
            let text = summary.to_text();
            print!("{text}");
            if let Some(p) = out {
                std::fs::write(&p, text).map_err(|e| Error::Io {
                    path: p.clone(),
                    source: e,
                })?;
            }
        }
        Command::Sweep {
            run,
            demos,
            out,
            jobs,
        } => {
            let cfg = run.resolve()?;
            let set = demos_for(&cfg, &demos)?;
            let report = harness::sweep(&cfg, &set, &out, jobs)?;
            println!("wrote {}", report.aggregate_path.display());
            for (seed, e) in &report.failed {
                eprintln!("seed {seed} failed: {e}");
            }
            if let Some((_, e)) = report.failed.into_iter().next() {
                return Err(e);
            }
        }
        Command::Plot {
            metrics,
            out,
            expert_score,
        } => {
            for p in harness::plot_runs(&metrics, &out, expert_score)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let level = std::env::var("IL_LOG_LEVEL").unwrap_or_else(|_| "info".into());
    env_logger::Builder::new()
        .parse_filters(&level)
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
