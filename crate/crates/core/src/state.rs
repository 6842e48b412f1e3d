//! Agent states in world coordinates and in the robot-centric frame.
//!
//! The value network never sees world coordinates. Every observation is
//! re-expressed in a frame centered on the robot with the x-axis pointing
//! at the robot's goal, which removes global position and heading from the
//! input distribution.

use serde::{Deserialize, Serialize};

use crate::vec2::Vec2;

/// Full state of one agent (robot or human) in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldAgentState {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    pub goal: Vec2,
    pub v_pref: f64,
}

impl WorldAgentState {
    pub fn distance_to_goal(&self) -> f64 {
        self.position.distance(self.goal)
    }
}

/// Robot's own state in the robot-centric frame: `[d_g, v_x, v_y, v_pref, r]`.
///
/// `d_g` is the distance to the goal; the velocity is the robot's world
/// velocity rotated into the goal-aligned frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotCentricRobotState {
    pub d_g: f64,
    pub vx: f64,
    pub vy: f64,
    pub v_pref: f64,
    pub radius: f64,
}

impl RobotCentricRobotState {
    pub const DIM: usize = 5;

    pub fn features(&self) -> [f64; Self::DIM] {
        [self.d_g, self.vx, self.vy, self.v_pref, self.radius]
    }
}

/// One human in the robot-centric frame:
/// `[p_x, p_y, v_x, v_y, r_i, d_i, r_i + r]`.
///
/// `d_i` is the robot-human center distance and `r_i + r` the sum of the
/// two radii, so a collision course is readable directly from the features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotCentricHumanState {
    pub px: f64,
    pub py: f64,
    pub vx: f64,
    pub vy: f64,
    pub radius: f64,
    pub dist: f64,
    pub radius_sum: f64,
}

impl RobotCentricHumanState {
    pub const DIM: usize = 7;

    pub fn features(&self) -> [f64; Self::DIM] {
        [
            self.px,
            self.py,
            self.vx,
            self.vy,
            self.radius,
            self.dist,
            self.radius_sum,
        ]
    }
}

/// Robot-centric view of the whole scene at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub robot: RobotCentricRobotState,
    pub humans: Vec<RobotCentricHumanState>,
    /// Angle of the world-frame goal direction; rotating a robot-centric
    /// offset by this angle recovers the world-frame offset.
    pub rotation: f64,
}

/// Threshold below which the goal direction is considered degenerate and
/// the frame falls back to the world axes.
pub const DEGENERATE_GOAL_DIST: f64 = 1e-9;

/// Re-expresses the scene in the robot-centric frame.
///
/// Velocities are rotated into the frame but not made relative to the
/// robot's motion; the robot's own velocity is a separate input, so
/// subtracting it would only remove information.
pub fn to_robot_centric(robot: &WorldAgentState, humans: &[WorldAgentState]) -> JointState {
    let to_goal = robot.goal - robot.position;
    let d_g = to_goal.norm();
    let rotation = if d_g < DEGENERATE_GOAL_DIST {
        0.0
    } else {
        to_goal.y.atan2(to_goal.x)
    };

    let robot_vel = robot.velocity.rotated(-rotation);
    let robot_rc = RobotCentricRobotState {
        d_g,
        vx: robot_vel.x,
        vy: robot_vel.y,
        v_pref: robot.v_pref,
        radius: robot.radius,
    };

    let humans_rc = humans
        .iter()
        .map(|h| {
            let rel = (h.position - robot.position).rotated(-rotation);
            let vel = h.velocity.rotated(-rotation);
            RobotCentricHumanState {
                px: rel.x,
                py: rel.y,
                vx: vel.x,
                vy: vel.y,
                radius: h.radius,
                dist: h.position.distance(robot.position),
                radius_sum: h.radius + robot.radius,
            }
        })
        .collect();

    JointState {
        robot: robot_rc,
        humans: humans_rc,
        rotation,
    }
}
