//! Optimal reciprocal collision avoidance in velocity space.
//!
//! Each neighbor induces one half-plane of velocities that keeps the pair
//! collision-free for `time_horizon` seconds, assuming the neighbor gives
//! way reciprocally (each side takes half the needed correction; against
//! a neighbor known never to move, the caller assigns the full share). The
//! returned velocity is the feasible point closest to the preferred
//! velocity, found by an incremental two-dimensional linear program; when
//! the half-planes have empty intersection the solver falls back to a
//! three-dimensional program that minimizes the worst violation.

use serde::{Deserialize, Serialize};

use crate::state::WorldAgentState;
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrcaParams {
    /// Neighbors beyond this center distance are ignored (m).
    pub neighbor_dist: f64,
    /// Pairwise collision-free window for agent constraints (s).
    pub time_horizon: f64,
    /// Horizon for static obstacle constraints (s); the current environment
    /// model has no obstacles, so this never enters the computation.
    pub time_horizon_obst: f64,
    /// At most this many closest neighbors constrain the velocity.
    pub max_neighbors: usize,
    /// Extra clearance added to the combined radius (m).
    pub safety_margin: f64,
}

impl Default for OrcaParams {
    fn default() -> Self {
        OrcaParams {
            neighbor_dist: 10.0,
            time_horizon: 5.0,
            time_horizon_obst: 5.0,
            max_neighbors: 10,
            safety_margin: 0.0,
        }
    }
}

/// Half-plane of admissible velocities: `v` is feasible when
/// `(v - point) . normal >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    /// A point on the boundary line, in velocity space (m/s).
    pub point: Vec2,
    /// Unit normal pointing into the feasible side.
    pub normal: Vec2,
}

impl HalfPlane {
    /// Builds from a boundary direction; the feasible side is to the left
    /// of `direction`.
    pub fn from_direction(point: Vec2, direction: Vec2) -> Self {
        HalfPlane {
            point,
            normal: direction.perp(),
        }
    }

    /// Boundary direction; the feasible side lies to its left.
    pub fn direction(&self) -> Vec2 {
        Vec2::new(self.normal.y, -self.normal.x)
    }

    pub fn contains(&self, v: Vec2) -> bool {
        (v - self.point).dot(self.normal) >= 0.0
    }

    /// Signed violation of the constraint; positive when `v` is infeasible.
    pub fn violation(&self, v: Vec2) -> f64 {
        (self.point - v).dot(self.normal)
    }
}

/// Near-parallel threshold for line intersections in the solvers.
const LP_EPSILON: f64 = 1e-9;

/// Velocity a goal-seeking agent would take with no one around: full
/// preferred speed toward the goal, shortened to land exactly on the goal
/// when it is less than one step away.
pub fn preferred_velocity(agent: &WorldAgentState, dt: f64) -> Vec2 {
    let to_goal = agent.goal - agent.position;
    let dist = to_goal.norm();
    if dist < 1e-12 {
        return Vec2::ZERO;
    }
    if dist > agent.v_pref * dt {
        to_goal / dist * agent.v_pref
    } else {
        to_goal / dt
    }
}

/// Static humans hold their position regardless of traffic.
pub fn static_human_policy(_agent: &WorldAgentState) -> Vec2 {
    Vec2::ZERO
}

/// Computes the collision-avoiding velocity for `agent` among `neighbors`,
/// all of whom reciprocate (share 1/2 each).
///
/// `neighbors` must not include the agent itself. The speed of the result
/// never exceeds `agent.v_pref`.
pub fn orca_velocity(
    agent: &WorldAgentState,
    neighbors: &[WorldAgentState],
    params: &OrcaParams,
    dt: f64,
) -> Vec2 {
    let weighted: Vec<(WorldAgentState, f64)> = neighbors.iter().map(|n| (*n, 0.5)).collect();
    orca_velocity_weighted(agent, &weighted, preferred_velocity(agent, dt), params, dt)
}

/// Like [`orca_velocity`], but each neighbor carries the share of the
/// pairwise correction this agent must absorb (1/2 when the neighbor runs
/// the same avoidance, 1 when it is known to stay put), and the preferred
/// velocity is supplied by the caller.
///
/// Full-share constraints are walls: when the program is infeasible they
/// stay hard and only the reciprocal constraints are relaxed, so the
/// fallback never chooses a velocity that drives into an immovable agent.
pub fn orca_velocity_weighted(
    agent: &WorldAgentState,
    neighbors: &[(WorldAgentState, f64)],
    pref: Vec2,
    params: &OrcaParams,
    dt: f64,
) -> Vec2 {
    let (lines, hard) = partitioned_lines(agent, neighbors, params, dt);
    let mut result = Vec2::ZERO;
    let fail = linear_program2(&lines, agent.v_pref, pref, false, &mut result);
    if fail < lines.len() {
        linear_program3(&lines, hard, fail, agent.v_pref, &mut result);
    }
    result
}

/// Builds one half-plane per effective neighbor, all reciprocating.
pub fn orca_lines(
    agent: &WorldAgentState,
    neighbors: &[WorldAgentState],
    params: &OrcaParams,
    dt: f64,
) -> Vec<HalfPlane> {
    let weighted: Vec<(WorldAgentState, f64)> = neighbors.iter().map(|n| (*n, 0.5)).collect();
    orca_lines_weighted(agent, &weighted, params, dt)
}

/// Builds one half-plane per effective neighbor, each weighted by this
/// agent's share of the pairwise correction. Full-share (wall) constraints
/// come first, then reciprocal ones, preserving neighbor index order
/// within each class, so the solver output is a deterministic function of
/// the input slice.
pub fn orca_lines_weighted(
    agent: &WorldAgentState,
    neighbors: &[(WorldAgentState, f64)],
    params: &OrcaParams,
    dt: f64,
) -> Vec<HalfPlane> {
    partitioned_lines(agent, neighbors, params, dt).0
}

/// Lines in solver order plus the count of leading hard (wall) lines.
fn partitioned_lines(
    agent: &WorldAgentState,
    neighbors: &[(WorldAgentState, f64)],
    params: &OrcaParams,
    dt: f64,
) -> (Vec<HalfPlane>, usize) {
    let mut candidates: Vec<(usize, f64)> = neighbors
        .iter()
        .enumerate()
        .map(|(i, (n, _))| (i, (n.position - agent.position).norm_sq()))
        .filter(|&(_, d2)| d2 <= params.neighbor_dist * params.neighbor_dist)
        .collect();
    if candidates.len() > params.max_neighbors {
        candidates.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        candidates.truncate(params.max_neighbors);
        candidates.sort_by_key(|c| c.0);
    }
    // Walls first, index order within each class.
    candidates.sort_by_key(|&(i, _)| (neighbors[i].1 < 1.0, i));
    let hard = candidates
        .iter()
        .take_while(|&&(i, _)| neighbors[i].1 >= 1.0)
        .count();

    let inv_time_horizon = 1.0 / params.time_horizon;
    let mut lines = Vec::with_capacity(candidates.len());
    for (idx, _) in candidates {
        let (other, share) = &neighbors[idx];
        let relative_position = other.position - agent.position;
        let relative_velocity = agent.velocity - other.velocity;
        let dist_sq = relative_position.norm_sq();
        let combined_radius = agent.radius + other.radius + params.safety_margin;
        let combined_radius_sq = combined_radius * combined_radius;

        let direction;
        let u;
        if dist_sq > combined_radius_sq {
            // No current overlap: constrain against the velocity obstacle
            // truncated at the time horizon.
            let w = relative_velocity - relative_position * inv_time_horizon;
            let w_len_sq = w.norm_sq();
            let dot1 = w.dot(relative_position);
            if dot1 < 0.0 && dot1 * dot1 > combined_radius_sq * w_len_sq {
                // Closest point is on the cut-off disk.
                let w_len = w_len_sq.sqrt();
                let unit_w = w / w_len;
                direction = Vec2::new(unit_w.y, -unit_w.x);
                u = unit_w * (combined_radius * inv_time_horizon - w_len);
            } else {
                // Closest point is on one of the cone legs.
                let leg = (dist_sq - combined_radius_sq).sqrt();
                if relative_position.det(w) > 0.0 {
                    direction = Vec2::new(
                        relative_position.x * leg - relative_position.y * combined_radius,
                        relative_position.x * combined_radius + relative_position.y * leg,
                    ) / dist_sq;
                } else {
                    direction = -(Vec2::new(
                        relative_position.x * leg + relative_position.y * combined_radius,
                        -relative_position.x * combined_radius + relative_position.y * leg,
                    ) / dist_sq);
                }
                let dot2 = relative_velocity.dot(direction);
                u = direction * dot2 - relative_velocity;
            }
        } else {
            // Already overlapping: resolve the overlap within one step.
            let inv_time_step = 1.0 / dt;
            let w = relative_velocity - relative_position * inv_time_step;
            let w_len = w.norm();
            let unit_w = w / w_len;
            direction = Vec2::new(unit_w.y, -unit_w.x);
            u = unit_w * (combined_radius * inv_time_step - w_len);
        }
        // This agent absorbs its share of u; the rest is the neighbor's.
        lines.push(HalfPlane::from_direction(
            agent.velocity + u * *share,
            direction,
        ));
    }
    (lines, hard)
}

/// Optimizes along the boundary of constraint `line_no` subject to the
/// speed disk and all earlier constraints. Returns false when that segment
/// is empty.
fn linear_program1(
    lines: &[HalfPlane],
    line_no: usize,
    radius: f64,
    opt_velocity: Vec2,
    direction_opt: bool,
    result: &mut Vec2,
) -> bool {
    let line = &lines[line_no];
    let dir = line.direction();
    let dot = line.point.dot(dir);
    let discriminant = dot * dot + radius * radius - line.point.norm_sq();
    if discriminant < 0.0 {
        // The speed disk misses this boundary line entirely.
        return false;
    }
    let sqrt_d = discriminant.sqrt();
    let mut t_left = -dot - sqrt_d;
    let mut t_right = -dot + sqrt_d;

    for prev in &lines[..line_no] {
        let prev_dir = prev.direction();
        let denominator = dir.det(prev_dir);
        let numerator = prev_dir.det(line.point - prev.point);
        if denominator.abs() <= LP_EPSILON {
            // Lines are effectively parallel.
            if numerator < 0.0 {
                return false;
            }
            continue;
        }
        let t = numerator / denominator;
        if denominator >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return false;
        }
    }

    let t = if direction_opt {
        if opt_velocity.dot(dir) > 0.0 {
            t_right
        } else {
            t_left
        }
    } else {
        dir.dot(opt_velocity - line.point).clamp(t_left, t_right)
    };
    *result = line.point + dir * t;
    true
}

/// Incremental two-dimensional program: starts from the unconstrained
/// optimum inside the speed disk and re-projects whenever a constraint is
/// violated. Returns `lines.len()` on success, or the index of the first
/// constraint that could not be satisfied.
fn linear_program2(
    lines: &[HalfPlane],
    radius: f64,
    opt_velocity: Vec2,
    direction_opt: bool,
    result: &mut Vec2,
) -> usize {
    if direction_opt {
        // opt_velocity is a unit direction: optimize to the disk boundary.
        *result = opt_velocity * radius;
    } else if opt_velocity.norm_sq() > radius * radius {
        *result = opt_velocity.normalized() * radius;
    } else {
        *result = opt_velocity;
    }

    for i in 0..lines.len() {
        if lines[i].direction().det(lines[i].point - *result) > 0.0 {
            let temp = *result;
            if !linear_program1(lines, i, radius, opt_velocity, direction_opt, result) {
                *result = temp;
                return i;
            }
        }
    }
    lines.len()
}

/// Fallback for an infeasible program: finds the velocity minimizing the
/// maximum violation of the relaxable constraints (the third dimension of
/// the relaxed program). The first `hard` lines are walls and are never
/// relaxed.
fn linear_program3(lines: &[HalfPlane], hard: usize, begin_line: usize, radius: f64, result: &mut Vec2) {
    let mut distance = 0.0;
    for i in begin_line..lines.len() {
        let dir_i = lines[i].direction();
        if dir_i.det(lines[i].point - *result) > distance {
            // Current result violates line i more than the running worst
            // violation; project onto the equal-violation arrangement,
            // keeping the wall constraints exact.
            let mut proj_lines: Vec<HalfPlane> = lines[..hard].to_vec();
            for line_j in &lines[hard.min(i)..i] {
                let dir_j = line_j.direction();
                let determinant = dir_i.det(dir_j);
                let point = if determinant.abs() <= LP_EPSILON {
                    if dir_i.dot(dir_j) > 0.0 {
                        // Same direction: line j adds nothing here.
                        continue;
                    }
                    (lines[i].point + line_j.point) * 0.5
                } else {
                    lines[i].point
                        + dir_i * (dir_j.det(lines[i].point - line_j.point) / determinant)
                };
                let direction = (dir_j - dir_i).normalized();
                proj_lines.push(HalfPlane::from_direction(point, direction));
            }

            let temp = *result;
            if linear_program2(&proj_lines, radius, lines[i].normal, true, result)
                < proj_lines.len()
            {
                // Should not happen by construction; keep the last valid
                // point if it does.
                *result = temp;
            }
            distance = dir_i.det(lines[i].point - *result);
        }
    }
}
