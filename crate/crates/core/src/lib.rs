//! Crowd navigation for a single robot among simulated pedestrians:
//! a seeded point-mass simulator with reciprocal collision avoidance,
//! an attention-based value network with its own reverse-mode autodiff,
//! imitation and temporal-difference training, and batch evaluation.

pub mod action;
pub mod astg;
pub mod autodiff;
pub mod config;
pub mod error;
pub mod eval;
pub mod orca;
pub mod rng;
pub mod sim;
pub mod state;
pub mod trainer;
pub mod vec2;

pub use action::{build_action_space, Action};
pub use error::{Error, Result};
pub use state::{to_robot_centric, JointState, WorldAgentState};
pub use vec2::Vec2;
