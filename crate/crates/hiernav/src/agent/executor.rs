//! Waypoint-following motion control: turn-in-place alignment, exact
//! landings on route vertices, and en-route conflict monitoring.

use super::Sim;
use crate::geometry::{point_segment_dist, wrap_angle, Point};
use crate::grid::OccupancyGrid;
use crate::planner::local::detect_conflict;
use crate::robot::{Command, SIM_DT_S};
use crate::sensor::{simulate_depth, ScanParams};
use crate::trace::TraceWriter;

/// Heading error above which the robot rotates in place instead of
/// driving; keeps lateral drift while steering well inside the local
/// planner's inflation margin.
pub(crate) const HEADING_GATE_RAD: f64 = 0.15;
/// Route vertices are landed on exactly (speed tapers to dist/dt), so the
/// tolerance only absorbs cross-track residue.
pub(crate) const LAND_TOL_M: f64 = 0.03;
/// Conflict cells matter when they sit this close to the remaining route.
pub(crate) const CONFLICT_GATE_M: f64 = 0.35;
const SCAN_EVERY_TICKS: u32 = 3;

/// One control step toward a target point.
pub(crate) fn steer(sim: &Sim, target: Point) -> Command {
    let pose = sim.robot.pose;
    let dist = pose.position.dist(target);
    let bearing = (target.y - pose.position.y).atan2(target.x - pose.position.x);
    let e = wrap_angle(bearing - pose.yaw_rad);
    if e.abs() > HEADING_GATE_RAD {
        Command { v_mps: 0.0, yaw_rate_rps: e / SIM_DT_S }
    } else {
        Command {
            v_mps: (dist / SIM_DT_S).min(sim.robot.max_speed_mps),
            yaw_rate_rps: e / SIM_DT_S,
        }
    }
}

#[derive(Debug, PartialEq)]
pub(crate) enum GotoOutcome {
    Reached,
    Collided,
    Budget,
    Stuck,
}

/// Drive to a single point, rotating first when badly misaligned.
pub(crate) fn goto(
    sim: &mut Sim,
    trace: &mut TraceWriter,
    target: Point,
    tol_m: f64,
    max_ticks: u32,
) -> GotoOutcome {
    for _ in 0..max_ticks {
        if !sim.budget_left() {
            return GotoOutcome::Budget;
        }
        if sim.robot.position().dist(target) <= tol_m {
            return GotoOutcome::Reached;
        }
        let cmd = steer(sim, target);
        if sim.tick(cmd, trace) {
            return GotoOutcome::Collided;
        }
    }
    GotoOutcome::Stuck
}

/// Rotate in place to an absolute heading.
pub(crate) fn rotate_to(sim: &mut Sim, trace: &mut TraceWriter, yaw_rad: f64) -> GotoOutcome {
    for _ in 0..200 {
        if !sim.budget_left() {
            return GotoOutcome::Budget;
        }
        let e = wrap_angle(yaw_rad - sim.robot.pose.yaw_rad);
        if e.abs() <= 0.02 {
            return GotoOutcome::Reached;
        }
        sim.tick(Command { v_mps: 0.0, yaw_rate_rps: e / SIM_DT_S }, trace);
    }
    GotoOutcome::Stuck
}

#[derive(Debug)]
pub(crate) enum DriveStop {
    /// All route vertices landed.
    Done,
    /// Sensed obstacles contradict memory near the remaining route.
    Conflict(Vec<(usize, usize)>),
    /// The per-segment deadline passed.
    Timeout,
    Budget,
    Collided,
}

fn near_remaining_route(p: Point, robot: Point, rest: &[Point], gate_m: f64) -> bool {
    if rest.is_empty() {
        return p.dist(robot) <= gate_m;
    }
    let mut prev = robot;
    for &v in rest {
        if point_segment_dist(p, prev, v) <= gate_m {
            return true;
        }
        prev = v;
    }
    false
}

/// Follow a polyline, landing on every vertex, while watching for
/// map/sensor conflicts ahead and the segment deadline. The final vertex
/// accepts `final_tol_m` instead of the exact landing: stopping early on
/// the last leg stays on the planned corridor, and a segment handoff point
/// (a door center) only needs to be reached within the arrival radius.
pub(crate) fn drive_route(
    sim: &mut Sim,
    trace: &mut TraceWriter,
    route: &[Point],
    memory: Option<&OccupancyGrid>,
    deadline_s: f64,
    lookahead_m: f64,
    final_tol_m: f64,
) -> DriveStop {
    let mut idx = 0;
    let mut ticks = 0u32;
    while idx < route.len() {
        if !sim.budget_left() {
            return DriveStop::Budget;
        }
        if sim.robot.sim_time_s > deadline_s {
            return DriveStop::Timeout;
        }
        if let Some(mem) = memory {
            if ticks % SCAN_EVERY_TICKS == 0 {
                if let Ok(scan) = simulate_depth(&sim.active, sim.robot.pose, ScanParams::default())
                {
                    let cells = detect_conflict(&scan, mem, sim.robot.pose, lookahead_m);
                    let robot = sim.robot.position();
                    let relevant: Vec<(usize, usize)> = cells
                        .into_iter()
                        .filter(|&(ix, iy)| {
                            near_remaining_route(
                                mem.cell_center(ix, iy),
                                robot,
                                &route[idx..],
                                CONFLICT_GATE_M,
                            )
                        })
                        .collect();
                    if !relevant.is_empty() {
                        return DriveStop::Conflict(relevant);
                    }
                }
            }
        }
        let tol = if idx + 1 == route.len() { final_tol_m.max(LAND_TOL_M) } else { LAND_TOL_M };
        if sim.robot.position().dist(route[idx]) <= tol {
            idx += 1;
            continue;
        }
        let cmd = steer(sim, route[idx]);
        let collided = sim.tick(cmd, trace);
        ticks += 1;
        if collided {
            return DriveStop::Collided;
        }
    }
    DriveStop::Done
}
