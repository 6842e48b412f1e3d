//! Evaluation harness: greedy rollouts over a fixed seed list, per-step
//! episode records, and the navigation metrics (success, collision, and
//! timeout rates, discomfort frequency, and plain and weighted
//! navigation times).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{build_action_space, Action};
use crate::astg::{AstgConfig, HistoryWindow};
use crate::autodiff::checkpoint::ParamSet;
use crate::error::{Error, Result};
use crate::orca::{orca_velocity, OrcaParams};
use crate::sim::{Cause, CrowdSim, EpisodeConfig, ScenarioSpec, WorldSnapshot};
use crate::state::WorldAgentState;
use crate::trainer::ValuePolicy;

/// Version tag on the first line of every episode-record file.
pub const RECORDS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub cases: usize,
    /// Rollout thread cap; 0 uses the global default pool.
    pub workers: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            cases: 1000,
            workers: 0,
        }
    }
}

/// The robot controller under evaluation.
pub enum RobotPolicy<'a> {
    /// Greedy one-step lookahead on a trained value network.
    Value {
        net: &'a AstgConfig,
        params: &'a ParamSet,
        gamma: f64,
    },
    /// Reciprocal collision avoidance, same controller as the humans.
    Orca(OrcaParams),
}

/// One instant of an episode. The first entry carries the initial state
/// and no action; every later entry describes the state after applying
/// `action`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEntry {
    pub time: f64,
    pub robot: WorldAgentState,
    pub humans: Vec<WorldAgentState>,
    pub action: Option<Action>,
    pub reward: Option<f64>,
    /// Minimum robot-human surface separation swept over the step;
    /// absent on the initial entry and in scenes with no humans.
    pub d_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub scenario: ScenarioSpec,
    pub steps: Vec<StepEntry>,
    pub cause: Cause,
    /// Wall-clock episode length (s); the goal-reaching time for
    /// successes.
    pub nav_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub cases: usize,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub timeout_rate: f64,
    /// Fraction of steps (across all episodes) with d_min below the
    /// discomfort distance.
    pub disc_freq: f64,
    /// Mean navigation time over success cases; absent without any.
    pub t_succ_nav: Option<f64>,
    /// Discomfort- and collision-penalized navigation time; absent when
    /// every case timed out.
    pub t_weighted_nav: Option<f64>,
    pub n_succ: usize,
    pub n_coll: usize,
    /// Discomfort steps counted over success cases only.
    pub n_disc: usize,
}

fn snapshot_entry(
    world: &WorldSnapshot,
    action: Option<Action>,
    reward: Option<f64>,
    d_min: Option<f64>,
) -> StepEntry {
    StepEntry {
        time: world.time,
        robot: world.robot,
        humans: world.humans.iter().map(|h| h.state).collect(),
        action,
        reward,
        d_min,
    }
}

/// Rolls out one episode under `policy` on the scenario drawn from
/// `seed`. Value policies act greedily (no exploration).
pub fn rollout_one(
    policy: &RobotPolicy,
    spec: &ScenarioSpec,
    episode: &EpisodeConfig,
    orca: &OrcaParams,
    seed: u64,
) -> Result<EpisodeRecord> {
    let spec = spec.clone().with_seed(seed);
    let mut sim = CrowdSim::new(spec.clone(), *episode, *orca)?;
    let actions = build_action_space(sim.world().robot.v_pref);

    let mut window = match policy {
        RobotPolicy::Value { net, .. } => {
            let mut w = HistoryWindow::new(net.history_len);
            w.push(sim.world().observe())?;
            Some(w)
        }
        RobotPolicy::Orca(_) => None,
    };

    let mut steps = vec![snapshot_entry(sim.world(), None, None, None)];
    let (cause, nav_time) = loop {
        let action = match policy {
            RobotPolicy::Value { net, params, gamma } => ValuePolicy {
                net,
                params,
                actions: &actions,
                gamma: *gamma,
                episode,
            }
            .greedy(sim.world(), window.as_ref().unwrap())?,
            RobotPolicy::Orca(robot_orca) => {
                let world = sim.world();
                let neighbors: Vec<WorldAgentState> =
                    world.humans.iter().map(|h| h.state).collect();
                let v = orca_velocity(&world.robot, &neighbors, robot_orca, episode.dt);
                Action { vx: v.x, vy: v.y }
            }
        };
        let out = sim.step(action)?;
        steps.push(snapshot_entry(
            &out.next,
            Some(action),
            Some(out.reward),
            out.d_min.is_finite().then_some(out.d_min),
        ));
        if let Some(w) = window.as_mut() {
            w.push(out.next.observe())?;
        }
        if out.terminal {
            break (out.cause, out.next.time);
        }
    };

    Ok(EpisodeRecord {
        seed,
        scenario: spec,
        steps,
        cause,
        nav_time,
    })
}

/// Evaluates `cases` episodes with per-case seeds `base_seed + index`,
/// in index order. The seed list depends only on `base_seed` and
/// `cases`, so different policies see identical scenario sets.
pub fn run_eval(
    policy: &RobotPolicy,
    spec: &ScenarioSpec,
    episode: &EpisodeConfig,
    orca: &OrcaParams,
    cases: usize,
    base_seed: u64,
    workers: usize,
) -> Result<Vec<EpisodeRecord>> {
    if cases == 0 {
        return Err(Error::Config("evaluation needs at least one case".into()));
    }
    let run = || -> Result<Vec<EpisodeRecord>> {
        (0..cases)
            .into_par_iter()
            .map(|i| rollout_one(policy, spec, episode, orca, base_seed.wrapping_add(i as u64)))
            .collect()
    };
    if workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        pool.install(run)
    } else {
        run()
    }
}

fn discomfort_steps(record: &EpisodeRecord, cfg: &EpisodeConfig) -> usize {
    record
        .steps
        .iter()
        .filter(|s| s.action.is_some())
        .filter(|s| s.d_min.is_some_and(|d| d < cfg.discomfort_dist))
        .count()
}

/// Mean penalized navigation time over decided (non-timeout) cases:
/// each success contributes its navigation time plus half a step per
/// discomfort step, each collision contributes the full time limit.
pub fn weighted_nav_time(records: &[EpisodeRecord], cfg: &EpisodeConfig) -> Result<f64> {
    let mut total = 0.0;
    let mut decided = 0usize;
    for r in records {
        match r.cause {
            Cause::ReachedGoal => {
                total += r.nav_time + discomfort_steps(r, cfg) as f64 * 0.5 * cfg.dt;
                decided += 1;
            }
            Cause::Collision => {
                total += cfg.time_limit;
                decided += 1;
            }
            Cause::Timeout | Cause::Running => {}
        }
    }
    if decided == 0 {
        return Err(Error::UndefinedMetric(
            "weighted navigation time needs at least one success or collision".into(),
        ));
    }
    Ok(total / decided as f64)
}

pub fn summarize(records: &[EpisodeRecord], cfg: &EpisodeConfig) -> Result<MetricsSummary> {
    if records.is_empty() {
        return Err(Error::Usage("cannot summarize zero records".into()));
    }
    let n = records.len();
    let n_succ = records.iter().filter(|r| r.cause == Cause::ReachedGoal).count();
    let n_coll = records.iter().filter(|r| r.cause == Cause::Collision).count();
    let n_timeout = records.iter().filter(|r| r.cause == Cause::Timeout).count();

    let total_steps: usize = records
        .iter()
        .map(|r| r.steps.iter().filter(|s| s.action.is_some()).count())
        .sum();
    let disc_steps_all: usize = records.iter().map(|r| discomfort_steps(r, cfg)).sum();
    let n_disc: usize = records
        .iter()
        .filter(|r| r.cause == Cause::ReachedGoal)
        .map(|r| discomfort_steps(r, cfg))
        .sum();

    let t_succ_nav = (n_succ > 0).then(|| {
        records
            .iter()
            .filter(|r| r.cause == Cause::ReachedGoal)
            .map(|r| r.nav_time)
            .sum::<f64>()
            / n_succ as f64
    });

    Ok(MetricsSummary {
        cases: n,
        success_rate: n_succ as f64 / n as f64,
        collision_rate: n_coll as f64 / n as f64,
        timeout_rate: n_timeout as f64 / n as f64,
        disc_freq: disc_steps_all as f64 / total_steps.max(1) as f64,
        t_succ_nav,
        t_weighted_nav: weighted_nav_time(records, cfg).ok(),
        n_succ,
        n_coll,
        n_disc,
    })
}

/// Plain-text metrics report.
pub fn render_metrics(s: &MetricsSummary) -> String {
    let fmt_time = |t: Option<f64>| match t {
        Some(t) => format!("{t:.3} s"),
        None => "undefined".to_string(),
    };
    format!(
        "cases           {}\n\
         success_rate    {:.4}\n\
         collision_rate  {:.4}\n\
         timeout_rate    {:.4}\n\
         disc_freq       {:.4}\n\
         t_succ_nav      {}\n\
         t_weighted_nav  {}\n\
         n_succ          {}\n\
         n_coll          {}\n\
         n_disc          {}\n",
        s.cases,
        s.success_rate,
        s.collision_rate,
        s.timeout_rate,
        s.disc_freq,
        fmt_time(s.t_succ_nav),
        fmt_time(s.t_weighted_nav),
        s.n_succ,
        s.n_coll,
        s.n_disc,
    )
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordsHeader {
    format_version: u32,
}

/// Writes records as line-delimited JSON behind a version header line.
pub fn write_records(path: &Path, records: &[EpisodeRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let header = serde_json::to_string(&RecordsHeader {
        format_version: RECORDS_FORMAT_VERSION,
    })
    .map_err(|e| Error::Format(e.to_string()))?;
    writeln!(out, "{header}")?;
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Format("record file is empty".into()))??;
    let header: RecordsHeader =
        serde_json::from_str(&first).map_err(|e| Error::Format(format!("header: {e}")))?;
    if header.format_version != RECORDS_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported record format version {} (expected {RECORDS_FORMAT_VERSION})",
            header.format_version
        )));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("record line {}: {e}", i + 2)))?,
        );
    }
    Ok(records)
}
