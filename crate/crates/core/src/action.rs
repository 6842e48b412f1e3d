//! Discrete holonomic action set for the robot.

use serde::{Deserialize, Serialize};

use crate::vec2::Vec2;

/// A velocity command held for one control interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub vx: f64,
    pub vy: f64,
}

impl Action {
    pub const STOP: Action = Action { vx: 0.0, vy: 0.0 };

    pub fn velocity(&self) -> Vec2 {
        Vec2::new(self.vx, self.vy)
    }

    pub fn speed(&self) -> f64 {
        self.velocity().norm()
    }
}

pub const SPEED_SAMPLES: usize = 5;
pub const HEADING_SAMPLES: usize = 16;

/// Builds the discrete action set: the stop action, then five speeds
/// exponentially spaced in (0, v_pref] crossed with 16 headings uniform
/// over the circle. Ordering is fixed (stop, then speeds ascending, then
/// headings counter-clockwise from +x) so that action indices are stable
/// across runs.
pub fn build_action_space(v_pref: f64) -> Vec<Action> {
    let mut actions = Vec::with_capacity(1 + SPEED_SAMPLES * HEADING_SAMPLES);
    actions.push(Action::STOP);
    for k in 1..=SPEED_SAMPLES {
        let speed = (f64::exp(k as f64 / SPEED_SAMPLES as f64) - 1.0)
            / (std::f64::consts::E - 1.0)
            * v_pref;
        for j in 0..HEADING_SAMPLES {
            let heading = 2.0 * std::f64::consts::PI * j as f64 / HEADING_SAMPLES as f64;
            actions.push(Action {
                vx: speed * heading.cos(),
                vy: speed * heading.sin(),
            });
        }
    }
    actions
}
