//! Unicycle robot kinematics with disc collision against the grid.

use crate::geometry::{wrap_angle, Point, Pose};
use crate::grid::OccupancyGrid;
use serde::{Deserialize, Serialize};

pub const DEFAULT_ROBOT_RADIUS_M: f64 = 0.2;
pub const DEFAULT_MAX_SPEED_MPS: f64 = 0.5;
pub const DEFAULT_MAX_YAW_RATE_RPS: f64 = 1.0;
/// Simulation step, 15 frames per second.
pub const SIM_DT_S: f64 = 1.0 / 15.0;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose,
    pub radius_m: f64,
    pub max_speed_mps: f64,
    pub max_yaw_rate_rps: f64,
    pub sim_time_s: f64,
}

impl RobotState {
    pub fn at(pose: Pose) -> Self {
        Self {
            pose,
            radius_m: DEFAULT_ROBOT_RADIUS_M,
            max_speed_mps: DEFAULT_MAX_SPEED_MPS,
            max_yaw_rate_rps: DEFAULT_MAX_YAW_RATE_RPS,
            sim_time_s: 0.0,
        }
    }

    pub fn position(&self) -> Point {
        self.pose.position
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Command {
    pub v_mps: f64,
    pub yaw_rate_rps: f64,
}

impl Command {
    pub const STOP: Command = Command {
        v_mps: 0.0,
        yaw_rate_rps: 0.0,
    };
}

/// One Euler step of the unicycle model. Translation that would overlap an
/// Occupied cell is rejected (collision flag), rotation always applies.
pub fn step_robot(
    state: &RobotState,
    cmd: Command,
    dt_s: f64,
    grid: &OccupancyGrid,
) -> (RobotState, bool) {
    let v = cmd.v_mps.clamp(-state.max_speed_mps, state.max_speed_mps);
    let w = cmd
        .yaw_rate_rps
        .clamp(-state.max_yaw_rate_rps, state.max_yaw_rate_rps);
    let yaw = state.pose.yaw_rad;
    let candidate = state.pose.position.polar(yaw, v * dt_s);
    let collided = v != 0.0 && grid.disc_collides(candidate, state.radius_m);
    let mut next = *state;
    next.pose.position = if collided {
        state.pose.position
    } else {
        candidate
    };
    next.pose.yaw_rad = wrap_angle(yaw + w * dt_s);
    next.sim_time_s += dt_s;
    (next, collided)
}
