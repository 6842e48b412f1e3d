//! Command-line front end: train a value network, evaluate a policy
//! over seeded cases, or roll out and export a single episode.
//!
//! Every run writes its fully resolved configuration next to its
//! outputs; re-running from that file reproduces the run bit for bit.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crowdnav::astg::{init_params, param_template, AblationMode};
use crowdnav::autodiff::checkpoint::ParamSet;
use crowdnav::config::RunConfig;
use crowdnav::eval::{
    render_metrics, rollout_one, run_eval, summarize, write_records, EpisodeRecord, RobotPolicy,
};
use crowdnav::rng::RngSet;
use crowdnav::sim::{GroupLayout, ScenarioKind, GROUP_SIZE};
use crowdnav::trainer::{il_pretrain, rl_train, TrainContext};

#[derive(Parser)]
#[command(name = "crowdnav", version, about = "Crowd navigation: training, evaluation, rollouts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the value network: imitation bootstrap, then
    /// temporal-difference learning.
    Train(TrainArgs),
    /// Evaluate a policy over seeded cases and report metrics.
    Eval(EvalArgs),
    /// Roll out one episode and export its trajectory.
    Rollout(RolloutArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioFlag {
    /// Moving humans crossing a circle to antipodal goals.
    Circle,
    /// Circle crossing plus scattered standing humans.
    Scattered,
    /// Circle crossing plus a five-human static formation.
    Group,
}

impl From<ScenarioFlag> for ScenarioKind {
    fn from(f: ScenarioFlag) -> ScenarioKind {
        match f {
            ScenarioFlag::Circle => ScenarioKind::CircleCrossing,
            ScenarioFlag::Scattered => ScenarioKind::ScatteredStatic,
            ScenarioFlag::Group => ScenarioKind::GroupStatic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutFlag {
    #[value(name = "DS", alias = "ds")]
    Ds,
    #[value(name = "RO", alias = "ro")]
    Ro,
    #[value(name = "CO", alias = "co")]
    Co,
}

impl From<LayoutFlag> for GroupLayout {
    fn from(f: LayoutFlag) -> GroupLayout {
        match f {
            LayoutFlag::Ds => GroupLayout::Ds,
            LayoutFlag::Ro => GroupLayout::Ro,
            LayoutFlag::Co => GroupLayout::Co,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AblationFlag {
    #[value(name = "full")]
    Full,
    #[value(name = "spatial_only")]
    SpatialOnly,
    #[value(name = "temporal_only")]
    TemporalOnly,
}

impl From<AblationFlag> for AblationMode {
    fn from(f: AblationFlag) -> AblationMode {
        match f {
            AblationFlag::Full => AblationMode::Full,
            AblationFlag::SpatialOnly => AblationMode::SpatialOnly,
            AblationFlag::TemporalOnly => AblationMode::TemporalOnly,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PolicyFlag {
    /// Greedy lookahead on a trained value network (needs --checkpoint).
    Astg,
    /// Reciprocal collision avoidance, no learning.
    Orca,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration file (TOML); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; every random stream derives from it.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    scenario: Option<ScenarioFlag>,
    /// Number of moving humans.
    #[arg(long)]
    dynamic: Option<usize>,
    /// Number of standing humans.
    #[arg(long = "static")]
    n_static: Option<usize>,
    /// Formation for the group scenario.
    #[arg(long, value_enum)]
    layout: Option<LayoutFlag>,
    /// Network variant to build or expect in a checkpoint.
    #[arg(long, value_enum)]
    ablation: Option<AblationFlag>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Demonstration episodes for the imitation stage.
    #[arg(long = "il-episodes")]
    il_episodes: Option<usize>,
    /// Episodes for the temporal-difference stage.
    #[arg(long = "rl-episodes")]
    rl_episodes: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Number of evaluation cases.
    #[arg(long)]
    cases: Option<usize>,
    /// Rollout thread cap; 0 uses the global default pool.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value = "astg")]
    policy: PolicyFlag,
    /// Trained parameters to evaluate.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Args)]
struct RolloutArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_enum, default_value = "astg")]
    policy: PolicyFlag,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Rollout(args) => cmd_rollout(args),
    }
}

/// Defaults, then the config file, then flag overrides; validated only
/// after the merge so a file and flags can be valid together.
fn resolve(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(kind) = common.scenario {
        cfg.scenario.kind = kind.into();
        match cfg.scenario.kind {
            ScenarioKind::CircleCrossing => {
                cfg.scenario.n_static = 0;
                cfg.scenario.layout = None;
            }
            ScenarioKind::ScatteredStatic => {
                cfg.scenario.layout = None;
            }
            ScenarioKind::GroupStatic => {
                cfg.scenario.n_static = GROUP_SIZE;
            }
        }
    }
    if let Some(n) = common.dynamic {
        cfg.scenario.n_dynamic = n;
    }
    if let Some(n) = common.n_static {
        cfg.scenario.n_static = n;
    }
    if let Some(layout) = common.layout {
        cfg.scenario.layout = Some(layout.into());
    }
    if let Some(mode) = common.ablation {
        cfg.network.mode = mode.into();
    }
    Ok(cfg)
}

fn prepare_out_dir(cfg: &RunConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("config.toml"), cfg.to_toml_string()?)?;
    Ok(())
}

/// Line-delimited JSON with a version header, matching the episode
/// record format.
fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut text = String::from("{\"format_version\":1}\n");
    for item in items {
        text.push_str(&serde_json::to_string(item)?);
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

fn load_params(cfg: &RunConfig, checkpoint: Option<&PathBuf>) -> Result<ParamSet> {
    let path = checkpoint.context("--checkpoint is required with --policy astg")?;
    let params =
        ParamSet::load(path).with_context(|| format!("loading {}", path.display()))?;
    params
        .check_matches(&param_template(&cfg.network))
        .context("checkpoint does not match the configured network")?;
    Ok(params)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut cfg = resolve(&args.common)?;
    if let Some(n) = args.il_episodes {
        cfg.train.il_episodes = n;
    }
    if let Some(n) = args.rl_episodes {
        cfg.train.rl_episodes = n;
    }
    cfg.validate()?;
    let out = &args.common.out;
    prepare_out_dir(&cfg, out)?;

    let ctx = TrainContext {
        scenario: &cfg.scenario,
        episode: &cfg.episode,
        orca: &cfg.orca,
        net: &cfg.network,
        train: &cfg.train,
    };
    let mut rngs = RngSet::from_seed(cfg.seed);
    let mut params = init_params(&cfg.network, &mut rngs.init);

    let il_curve = il_pretrain(&ctx, &mut params, &mut rngs)?;
    write_jsonl(&out.join("il_curve.jsonl"), &il_curve)?;
    if let Some(last) = il_curve.last() {
        println!(
            "imitation: {} episodes, {} epochs, final loss {:.6}",
            cfg.train.il_episodes, cfg.train.il_epochs, last.loss
        );
    }

    let mut sink = |episode: usize, p: &ParamSet| -> crowdnav::Result<()> {
        p.save(&out.join(format!("checkpoint_ep{episode}.json")))
    };
    let curve = rl_train(&ctx, &mut params, &mut rngs, Some(&mut sink))?;
    write_jsonl(&out.join("training_curve.jsonl"), &curve)?;
    params.save(&out.join("checkpoint.json"))?;
    let successes = curve
        .iter()
        .filter(|r| r.outcome == crowdnav::sim::Cause::ReachedGoal)
        .count();
    println!(
        "reinforcement: {} episodes, {} reached the goal",
        curve.len(),
        successes
    );
    println!("checkpoint written to {}", out.join("checkpoint.json").display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let mut cfg = resolve(&args.common)?;
    if let Some(n) = args.cases {
        cfg.eval.cases = n;
    }
    if let Some(n) = args.workers {
        cfg.eval.workers = n;
    }
    cfg.validate()?;
    let out = &args.common.out;
    prepare_out_dir(&cfg, out)?;

    let loaded;
    let policy = match args.policy {
        PolicyFlag::Astg => {
            loaded = load_params(&cfg, args.checkpoint.as_ref())?;
            RobotPolicy::Value {
                net: &cfg.network,
                params: &loaded,
                gamma: cfg.train.gamma,
            }
        }
        PolicyFlag::Orca => RobotPolicy::Orca(cfg.orca),
    };

    let records = run_eval(
        &policy,
        &cfg.scenario,
        &cfg.episode,
        &cfg.orca,
        cfg.eval.cases,
        cfg.seed,
        cfg.eval.workers,
    )?;
    write_records(&out.join("episodes.jsonl"), &records)?;

    let summary = summarize(&records, &cfg.episode)?;
    let report = render_metrics(&summary);
    fs::write(out.join("metrics.txt"), &report)?;
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    fs::write(out.join("metrics.json"), json)?;
    print!("{report}");
    Ok(())
}

fn cmd_rollout(args: RolloutArgs) -> Result<()> {
    let cfg = resolve(&args.common)?;
    cfg.validate()?;
    let out = &args.common.out;
    prepare_out_dir(&cfg, out)?;

    let loaded;
    let policy = match args.policy {
        PolicyFlag::Astg => {
            loaded = load_params(&cfg, args.checkpoint.as_ref())?;
            RobotPolicy::Value {
                net: &cfg.network,
                params: &loaded,
                gamma: cfg.train.gamma,
            }
        }
        PolicyFlag::Orca => RobotPolicy::Orca(cfg.orca),
    };

    let record = rollout_one(&policy, &cfg.scenario, &cfg.episode, &cfg.orca, cfg.seed)?;
    write_records(&out.join("episode.jsonl"), std::slice::from_ref(&record))?;
    write_trajectory(&out.join("trajectory.csv"), &record)?;
    println!(
        "episode ended with {:?} after {} s over {} steps",
        record.cause,
        record.nav_time,
        record.steps.len() - 1
    );
    Ok(())
}

/// Per-step positions of every agent, one row per instant.
fn write_trajectory(path: &Path, record: &EpisodeRecord) -> Result<()> {
    let n_humans = record.steps.first().map_or(0, |s| s.humans.len());
    let mut csv = String::from("time,robot_x,robot_y");
    for i in 0..n_humans {
        csv.push_str(&format!(",human{i}_x,human{i}_y"));
    }
    csv.push('\n');
    for step in &record.steps {
        csv.push_str(&format!(
            "{},{},{}",
            step.time, step.robot.position.x, step.robot.position.y
        ));
        for h in &step.humans {
            csv.push_str(&format!(",{},{}", h.position.x, h.position.y));
        }
        csv.push('\n');
    }
    fs::write(path, csv)?;
    Ok(())
}
