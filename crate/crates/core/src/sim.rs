//! Crowd simulator: scenario generation, synchronous stepping, rewards.
//!
//! Humans are driven by reciprocal collision avoidance among themselves
//! and never react to the robot (the robot is invisible to them), so the
//! robot must do all the work of staying clear. Scenarios, human motion,
//! and rewards are deterministic functions of the scenario seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orca::{orca_velocity_weighted, OrcaParams};
use crate::state::{to_robot_centric, JointState, WorldAgentState};
use crate::vec2::Vec2;
use crate::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Dynamic humans only, crossing a circle to antipodal goals.
    CircleCrossing,
    /// Circle-crossing dynamic humans plus statics scattered in the disc.
    ScatteredStatic,
    /// Circle-crossing dynamic humans plus five statics in a fixed group
    /// formation.
    GroupStatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupLayout {
    /// Dispersed: five rejection-sampled scattered statics.
    #[serde(rename = "DS")]
    Ds,
    /// Rows: two parallel rows of three and two.
    #[serde(rename = "RO")]
    Ro,
    /// Circle: five statics on a semicircular arc.
    #[serde(rename = "CO")]
    Co,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub n_dynamic: usize,
    pub n_static: usize,
    /// Group formation; required for (and only valid with) `GroupStatic`.
    pub layout: Option<GroupLayout>,
    /// Radius of the crossing circle (m).
    pub circle_radius: f64,
    pub human_radius: f64,
    pub human_v_pref: f64,
    pub robot_radius: f64,
    pub robot_v_pref: f64,
    /// Half-width of the uniform angular perturbation (rad) applied to
    /// circle placements.
    pub angular_jitter: f64,
    /// Half-width of the uniform positional jitter (m) applied to circle
    /// placements.
    pub position_jitter: f64,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            kind: ScenarioKind::CircleCrossing,
            n_dynamic: 5,
            n_static: 0,
            layout: None,
            circle_radius: 4.0,
            human_radius: 0.3,
            human_v_pref: 1.0,
            robot_radius: 0.3,
            robot_v_pref: 1.0,
            angular_jitter: 0.5,
            position_jitter: 0.5,
            seed: 0,
        }
    }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ScenarioKind::CircleCrossing => {
                if self.n_static != 0 {
                    return Err(Error::Config(
                        "circle_crossing takes no static humans; use scattered_static".into(),
                    ));
                }
                if self.layout.is_some() {
                    return Err(Error::Config("layout is only valid for group_static".into()));
                }
            }
            ScenarioKind::ScatteredStatic => {
                if self.layout.is_some() {
                    return Err(Error::Config("layout is only valid for group_static".into()));
                }
            }
            ScenarioKind::GroupStatic => {
                if self.layout.is_none() {
                    return Err(Error::Config("group_static requires a layout (DS, RO, CO)".into()));
                }
                if self.n_static != GROUP_SIZE {
                    return Err(Error::Config(format!(
                        "group_static places exactly {GROUP_SIZE} static humans, got {}",
                        self.n_static
                    )));
                }
            }
        }
        if self.circle_radius <= 0.0 || self.human_radius <= 0.0 || self.robot_radius <= 0.0 {
            return Err(Error::Config("radii must be positive".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Number of humans in every group formation.
pub const GROUP_SIZE: usize = 5;

/// Required clearance between agent surfaces at scenario start (m).
pub const MIN_SEPARATION: f64 = 0.2;

/// Placement attempts per human before generation gives up.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

/// In-row center spacing for the RO formation (m). Chosen slightly above
/// 0.8 so that two 0.3 m humans keep strictly more than the required
/// 0.2 m of surface clearance.
const ROW_SPACING: f64 = 0.81;

/// Arc radius for the CO formation (m). At 1.0 m the neighbor chord of a
/// five-point semicircle is 0.765 m, which puts surfaces closer than the
/// required clearance; 1.06 m keeps the formation legal.
const ARC_RADIUS: f64 = 1.06;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanAgent {
    pub state: WorldAgentState,
    /// Static humans hold position for the whole episode.
    pub is_static: bool,
}

/// Complete world state at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub robot: WorldAgentState,
    pub humans: Vec<HumanAgent>,
    pub time: f64,
}

impl WorldSnapshot {
    /// The robot's view of this instant, in its goal-aligned frame.
    pub fn observe(&self) -> JointState {
        let humans: Vec<WorldAgentState> = self.humans.iter().map(|h| h.state).collect();
        to_robot_centric(&self.robot, &humans)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpisodeConfig {
    /// Control interval (s).
    pub dt: f64,
    /// Episode time limit (s).
    pub time_limit: f64,
    /// Surface separation below which the robot discomforts a human (m).
    pub discomfort_dist: f64,
    pub success_reward: f64,
    pub collision_penalty: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            dt: 0.25,
            time_limit: 25.0,
            discomfort_dist: 0.2,
            success_reward: 1.0,
            collision_penalty: -0.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cause {
    Running,
    ReachedGoal,
    Collision,
    Timeout,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub reward: f64,
    pub next: WorldSnapshot,
    pub terminal: bool,
    pub cause: Cause,
    /// Minimum robot-human surface separation over this step's motion;
    /// positive infinity when there are no humans.
    pub d_min: f64,
}

/// Per-step reward. `reached` and `collided` are mutually exclusive; when
/// neither holds, a discomfort penalty ramps linearly from the collision
/// boundary (`d_min = 0`) up to zero at `discomfort_dist`.
pub fn reward_fn(d_min: f64, reached: bool, collided: bool, cfg: &EpisodeConfig) -> f64 {
    debug_assert!(!(reached && collided), "terminal flags must be exclusive");
    if collided {
        cfg.collision_penalty
    } else if reached {
        cfg.success_reward
    } else if d_min >= 0.0 && d_min < cfg.discomfort_dist {
        (d_min - cfg.discomfort_dist) / 2.0
    } else {
        0.0
    }
}

/// Terminal status of a snapshot, if any: collision dominates, then goal,
/// then timeout.
pub fn status(world: &WorldSnapshot, cfg: &EpisodeConfig) -> Option<Cause> {
    let overlapping = world.humans.iter().any(|h| {
        h.state.position.distance(world.robot.position) < h.state.radius + world.robot.radius
    });
    if overlapping {
        return Some(Cause::Collision);
    }
    if world.robot.distance_to_goal() < world.robot.radius {
        return Some(Cause::ReachedGoal);
    }
    if world.time >= cfg.time_limit {
        return Some(Cause::Timeout);
    }
    None
}

/// A human counts as arrived (and freezes) within this distance of its
/// goal point, tight enough that a parked human stands essentially on its
/// goal rather than short of it, blocking traffic.
const HUMAN_ARRIVAL_TOL: f64 = 0.1;

/// Arriving humans cross the freeze boundary no faster than this, so that
/// freezing never looks like a large velocity discontinuity to neighbors
/// mid-avoidance.
const ARRIVAL_CROSSING_SPEED: f64 = 0.1;

/// Preferred velocity for a dynamic human: full speed toward the goal,
/// decelerating over the last step's worth of distance so the human reaches
/// the freeze boundary nearly at rest instead of stopping instantly from
/// full speed.
fn arrival_preferred_velocity(state: &WorldAgentState, dt: f64) -> Vec2 {
    let to_goal = state.goal - state.position;
    let dist = to_goal.norm();
    if dist < 1e-12 {
        return Vec2::ZERO;
    }
    let speed = ((dist - HUMAN_ARRIVAL_TOL) / dt)
        .max(ARRIVAL_CROSSING_SPEED)
        .min(state.v_pref);
    to_goal / dist * speed
}

/// Velocities the humans will take this step, computed with no knowledge
/// of the robot. Dynamic humans run reciprocal avoidance against the other
/// humans only; humans that have arrived (and all statics) stay frozen.
/// Freezes take effect within the step: every avoidance query sees a frozen
/// neighbor at zero velocity and absorbs the full correction against it,
/// since a frozen human will not take its reciprocal share.
pub fn human_velocities(humans: &[HumanAgent], orca: &OrcaParams, dt: f64) -> Vec<Vec2> {
    let frozen: Vec<bool> = humans
        .iter()
        .map(|h| h.is_static || h.state.distance_to_goal() < HUMAN_ARRIVAL_TOL)
        .collect();
    let snapshot: Vec<(WorldAgentState, f64)> = humans
        .iter()
        .zip(&frozen)
        .map(|(h, &f)| {
            let mut s = h.state;
            if f {
                s.velocity = Vec2::ZERO;
            }
            (s, if f { 1.0 } else { 0.5 })
        })
        .collect();
    humans
        .iter()
        .enumerate()
        .map(|(i, h)| {
            if frozen[i] {
                return Vec2::ZERO;
            }
            let neighbors: Vec<(WorldAgentState, f64)> = snapshot
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, s)| *s)
                .collect();
            let pref = arrival_preferred_velocity(&h.state, dt);
            orca_velocity_weighted(&h.state, &neighbors, pref, orca, dt)
        })
        .collect()
}

/// Minimum distance from the origin reached by `p + t v` for `t` in
/// `[0, dt]` (closest point of approach on a bounded segment).
pub fn cpa_distance(p: Vec2, v: Vec2, dt: f64) -> f64 {
    let v2 = v.norm_sq();
    let t = if v2 > 0.0 {
        (-p.dot(v) / v2).clamp(0.0, dt)
    } else {
        0.0
    };
    (p + v * t).norm()
}

/// Minimum surface separation between a robot moving at `robot_vel` and
/// each human moving at its commanded velocity, over one interval.
pub fn sweep_separation(
    robot_pos: Vec2,
    robot_vel: Vec2,
    robot_radius: f64,
    humans: &[HumanAgent],
    human_vels: &[Vec2],
    dt: f64,
) -> f64 {
    humans
        .iter()
        .zip(human_vels)
        .map(|(h, &hv)| {
            let rel_p = h.state.position - robot_pos;
            let rel_v = hv - robot_vel;
            cpa_distance(rel_p, rel_v, dt) - (h.state.radius + robot_radius)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Advances the world by one interval with the robot holding `action`.
///
/// All agents move simultaneously along straight lines; collisions are
/// checked against the closest point of approach within the interval, so
/// a crossing that momentarily overlaps mid-step counts even if the
/// endpoints are clear.
pub fn step(
    world: &WorldSnapshot,
    action: Action,
    cfg: &EpisodeConfig,
    orca: &OrcaParams,
) -> Result<StepOutcome> {
    if let Some(cause) = status(world, cfg) {
        return Err(Error::Usage(format!(
            "cannot step an episode that already ended ({cause:?})"
        )));
    }

    let human_vels = human_velocities(&world.humans, orca, cfg.dt);
    let d_min = sweep_separation(
        world.robot.position,
        action.velocity(),
        world.robot.radius,
        &world.humans,
        &human_vels,
        cfg.dt,
    );
    let collided = d_min < 0.0;

    let mut next = world.clone();
    next.robot.position += action.velocity() * cfg.dt;
    next.robot.velocity = action.velocity();
    for (h, &v) in next.humans.iter_mut().zip(&human_vels) {
        h.state.position += v * cfg.dt;
        h.state.velocity = v;
    }
    next.time += cfg.dt;

    let reached = next.robot.distance_to_goal() < next.robot.radius;
    let cause = if collided {
        Cause::Collision
    } else if reached {
        Cause::ReachedGoal
    } else if next.time >= cfg.time_limit {
        Cause::Timeout
    } else {
        Cause::Running
    };
    let reward = reward_fn(d_min, cause == Cause::ReachedGoal, collided, cfg);

    Ok(StepOutcome {
        reward,
        next,
        terminal: cause != Cause::Running,
        cause,
        d_min,
    })
}

struct Placement {
    rng: ChaCha8Rng,
    /// (position, radius) of everything already placed, including the
    /// robot's start and goal footprints.
    occupied: Vec<(Vec2, f64)>,
    /// (goal, radius) footprints that future goals must clear.
    goals: Vec<(Vec2, f64)>,
}

fn clear_of(p: Vec2, radius: f64, others: &[(Vec2, f64)]) -> bool {
    others
        .iter()
        .all(|&(q, r)| p.distance(q) - radius - r > MIN_SEPARATION)
}

/// Generates the initial world for `spec`, deterministically in
/// `spec.seed`. All agent surfaces (and goal footprints against goals)
/// start strictly more than 0.2 m apart; placement that cannot satisfy
/// this within 1000 attempts per human is reported as an error.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<WorldSnapshot> {
    spec.validate()?;
    let r = spec.circle_radius;
    let robot = WorldAgentState {
        position: Vec2::new(0.0, -r),
        velocity: Vec2::ZERO,
        radius: spec.robot_radius,
        goal: Vec2::new(0.0, r),
        v_pref: spec.robot_v_pref,
    };

    let mut placement = Placement {
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        occupied: vec![(robot.position, robot.radius), (robot.goal, robot.radius)],
        goals: vec![(robot.goal, robot.radius)],
    };

    let mut humans = Vec::with_capacity(spec.n_dynamic + spec.n_static);
    for _ in 0..spec.n_dynamic {
        humans.push(place_dynamic(spec, &mut placement)?);
    }
    match spec.kind {
        ScenarioKind::CircleCrossing => {}
        ScenarioKind::ScatteredStatic => {
            for _ in 0..spec.n_static {
                humans.push(place_scattered(spec, &mut placement)?);
            }
        }
        ScenarioKind::GroupStatic => match spec.layout.expect("validated above") {
            GroupLayout::Ds => {
                for _ in 0..GROUP_SIZE {
                    humans.push(place_scattered(spec, &mut placement)?);
                }
            }
            GroupLayout::Ro => humans.extend(place_formation(spec, &mut placement, row_offsets)?),
            GroupLayout::Co => humans.extend(place_formation(spec, &mut placement, arc_offsets)?),
        },
    }

    Ok(WorldSnapshot {
        robot,
        humans,
        time: 0.0,
    })
}

fn place_dynamic(spec: &ScenarioSpec, pl: &mut Placement) -> Result<HumanAgent> {
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let angle = pl.rng.random_range(0.0..std::f64::consts::TAU)
            + pl.rng.random_range(-spec.angular_jitter..=spec.angular_jitter);
        let jx = pl.rng.random_range(-spec.position_jitter..=spec.position_jitter);
        let jy = pl.rng.random_range(-spec.position_jitter..=spec.position_jitter);
        let position =
            Vec2::new(spec.circle_radius * angle.cos(), spec.circle_radius * angle.sin())
                + Vec2::new(jx, jy);
        let goal = -position;
        if clear_of(position, spec.human_radius, &pl.occupied)
            && clear_of(goal, spec.human_radius, &pl.goals)
        {
            pl.occupied.push((position, spec.human_radius));
            pl.goals.push((goal, spec.human_radius));
            return Ok(HumanAgent {
                state: WorldAgentState {
                    position,
                    velocity: Vec2::ZERO,
                    radius: spec.human_radius,
                    goal,
                    v_pref: spec.human_v_pref,
                },
                is_static: false,
            });
        }
    }
    Err(Error::Scenario(format!(
        "no clear spot for a dynamic human after {MAX_PLACEMENT_ATTEMPTS} attempts (seed {})",
        spec.seed
    )))
}

fn disc_point(rng: &mut ChaCha8Rng, radius: f64) -> Vec2 {
    let r = radius * rng.random_range(0.0f64..=1.0).sqrt();
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    Vec2::new(r * phi.cos(), r * phi.sin())
}

fn place_scattered(spec: &ScenarioSpec, pl: &mut Placement) -> Result<HumanAgent> {
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let position = disc_point(&mut pl.rng, spec.circle_radius);
        if clear_of(position, spec.human_radius, &pl.occupied) {
            pl.occupied.push((position, spec.human_radius));
            return Ok(static_human(position, spec.human_radius));
        }
    }
    Err(Error::Scenario(format!(
        "no clear spot for a static human after {MAX_PLACEMENT_ATTEMPTS} attempts (seed {})",
        spec.seed
    )))
}

fn static_human(position: Vec2, radius: f64) -> HumanAgent {
    HumanAgent {
        state: WorldAgentState {
            position,
            velocity: Vec2::ZERO,
            radius,
            goal: position,
            v_pref: 0.0,
        },
        is_static: true,
    }
}

/// Two parallel rows of three and two, centered on the formation origin.
fn row_offsets(u: Vec2) -> [Vec2; GROUP_SIZE] {
    let w = u.perp();
    let half = ROW_SPACING / 2.0;
    [
        u * -ROW_SPACING - w * half,
        u * 0.0 - w * half,
        u * ROW_SPACING - w * half,
        u * -half + w * half,
        u * half + w * half,
    ]
}

/// Five points on a semicircular arc; `u` points along the arc's opening.
fn arc_offsets(u: Vec2) -> [Vec2; GROUP_SIZE] {
    let base = u.y.atan2(u.x) + std::f64::consts::FRAC_PI_2;
    std::array::from_fn(|k| {
        let ang = base + k as f64 * std::f64::consts::FRAC_PI_4;
        Vec2::new(ARC_RADIUS * ang.cos(), ARC_RADIUS * ang.sin())
    })
}

fn place_formation(
    spec: &ScenarioSpec,
    pl: &mut Placement,
    offsets: fn(Vec2) -> [Vec2; GROUP_SIZE],
) -> Result<Vec<HumanAgent>> {
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let center = disc_point(&mut pl.rng, spec.circle_radius / 2.0);
        let phi = pl.rng.random_range(0.0..std::f64::consts::TAU);
        let u = Vec2::new(phi.cos(), phi.sin());
        let positions: Vec<Vec2> = offsets(u).iter().map(|&o| center + o).collect();
        let ok = positions
            .iter()
            .all(|&p| clear_of(p, spec.human_radius, &pl.occupied));
        if ok {
            for &p in &positions {
                pl.occupied.push((p, spec.human_radius));
            }
            return Ok(positions
                .into_iter()
                .map(|p| static_human(p, spec.human_radius))
                .collect());
        }
    }
    Err(Error::Scenario(format!(
        "no clear placement for the static group after {MAX_PLACEMENT_ATTEMPTS} attempts (seed {})",
        spec.seed
    )))
}

/// Stateful episode wrapper around the pure stepping functions.
#[derive(Debug, Clone)]
pub struct CrowdSim {
    pub spec: ScenarioSpec,
    pub episode: EpisodeConfig,
    pub orca: OrcaParams,
    world: WorldSnapshot,
    done: bool,
}

impl CrowdSim {
    /// Builds the simulator and generates the initial scenario from
    /// `spec.seed`.
    pub fn new(spec: ScenarioSpec, episode: EpisodeConfig, orca: OrcaParams) -> Result<Self> {
        let world = generate_scenario(&spec)?;
        Ok(CrowdSim {
            spec,
            episode,
            orca,
            world,
            done: false,
        })
    }

    /// Regenerates the scenario under a new seed and clears the terminal
    /// flag.
    pub fn reset(&mut self, seed: u64) -> Result<&WorldSnapshot> {
        self.spec.seed = seed;
        self.world = generate_scenario(&self.spec)?;
        self.done = false;
        Ok(&self.world)
    }

    pub fn world(&self) -> &WorldSnapshot {
        &self.world
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn step(&mut self, action: Action) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Usage("episode already ended; reset first".into()));
        }
        let outcome = step(&self.world, action, &self.episode, &self.orca)?;
        self.world = outcome.next.clone();
        self.done = outcome.terminal;
        Ok(outcome)
    }
}
