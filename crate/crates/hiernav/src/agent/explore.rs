//! Mapping phase: either adopt the ground-truth static grid (Oracle) or
//! drive a left-wall-following tour that integrates depth scans into an
//! initially unknown memory grid (WallFollow).

use super::executor::{goto, rotate_to, GotoOutcome};
use super::Sim;
use crate::geometry::Point;
use crate::grid::{rasterize, CellState, OccupancyGrid};
use crate::sensor::{simulate_depth, DepthScan, ScanParams};
use crate::trace::TraceWriter;
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ExploreMode {
    /// Memory is the ground-truth static grid; the robot does not move.
    Oracle,
    /// Left-wall-following tour with a right-facing camera sweep.
    WallFollow,
}

impl std::str::FromStr for ExploreMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "oracle" => Ok(ExploreMode::Oracle),
            "wallfollow" | "wall-follow" | "wall_follow" => Ok(ExploreMode::WallFollow),
            other => Err(format!("unknown exploration mode {other:?}")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExploreError {
    #[error("exploration budget exhausted with {coverage_pct:.0}% free-space coverage")]
    InsufficientCoverage { coverage_pct: f64 },
}

/// Clearance required of a cell before the wall follower will stand on it.
const WALK_CLEARANCE_M: f64 = 0.26;

pub struct ExploreReport {
    pub memory: OccupancyGrid,
    pub loop_closed: bool,
    pub coverage: f64,
}

/// Standalone mapping run: explore a scenario from its start pose and
/// return the report plus the poses driven.
pub fn map_scenario(
    scenario: &crate::scenario::Scenario,
    mode: ExploreMode,
    step_budget: u32,
) -> (Result<ExploreReport, ExploreError>, Vec<crate::agent::TimedPose>) {
    let mut sim = Sim::new(scenario, step_budget);
    let mut trace = TraceWriter::null();
    let report = explore(&mut sim, &mut trace, mode);
    (report, sim.trajectory)
}

pub(crate) fn explore(
    sim: &mut Sim,
    trace: &mut TraceWriter,
    mode: ExploreMode,
) -> Result<ExploreReport, ExploreError> {
    match mode {
        ExploreMode::Oracle => Ok(ExploreReport {
            memory: rasterize(sim.scenario, false),
            loop_closed: false,
            coverage: 1.0,
        }),
        ExploreMode::WallFollow => wall_follow(sim, trace),
    }
}

/// Heading index: 0 = +x, 1 = +y, 2 = -x, 3 = -y.
fn heading_yaw(h: u8) -> f64 {
    match h {
        0 => 0.0,
        1 => FRAC_PI_2,
        2 => PI,
        _ => -FRAC_PI_2,
    }
}

fn heading_delta(h: u8) -> (i64, i64) {
    match h {
        0 => (1, 0),
        1 => (0, 1),
        2 => (-1, 0),
        _ => (0, -1),
    }
}

struct Mapper {
    memory: OccupancyGrid,
    /// Bumped whenever a memory cell changes; lets loop closure require a
    /// revisit with no new information in between.
    version: u64,
}

impl Mapper {
    fn mark(&mut self, ix: usize, iy: usize, s: CellState) {
        if self.memory.get(ix, iy) != s {
            self.memory.set(ix, iy, s);
            self.version += 1;
        }
    }

    fn integrate(&mut self, scan: &DepthScan) {
        let cell = self.memory.cell_size_m;
        for i in 0..scan.n_rays {
            let bearing = scan.bearing(i);
            let range = scan.ranges[i];
            let mut t = 0.0;
            while t < range - 1e-9 {
                let p = scan.pose.position.polar(bearing, t);
                if let Some((ix, iy)) = self.memory.world_to_cell(p) {
                    if self.memory.get(ix, iy) != CellState::Occupied {
                        self.mark(ix, iy, CellState::Free);
                    }
                }
                t += cell / 2.0;
            }
            if let Some(hit) = scan.hit_point(i) {
                let inside = hit.polar(bearing, cell / 2.0);
                if let Some((ix, iy)) = self.memory.world_to_cell(inside) {
                    self.mark(ix, iy, CellState::Occupied);
                }
            }
        }
    }

    /// Every cell square within the clearance disc is known Free.
    fn walkable(&self, center: Point) -> bool {
        let g = &self.memory;
        let r = WALK_CLEARANCE_M;
        let min_x = (((center.x - r - g.origin.x) / g.cell_size_m).floor()).max(0.0) as usize;
        let min_y = (((center.y - r - g.origin.y) / g.cell_size_m).floor()).max(0.0) as usize;
        let max_x = (((center.x + r - g.origin.x) / g.cell_size_m).floor()) as usize;
        let max_y = (((center.y + r - g.origin.y) / g.cell_size_m).floor()) as usize;
        for iy in min_y..=max_y.min(g.height.saturating_sub(1)) {
            for ix in min_x..=max_x.min(g.width.saturating_sub(1)) {
                let x0 = g.origin.x + ix as f64 * g.cell_size_m;
                let y0 = g.origin.y + iy as f64 * g.cell_size_m;
                let dx = (x0 - center.x).max(center.x - (x0 + g.cell_size_m)).max(0.0);
                let dy = (y0 - center.y).max(center.y - (y0 + g.cell_size_m)).max(0.0);
                if dx * dx + dy * dy < r * r && g.get(ix, iy) != CellState::Free {
                    return false;
                }
            }
        }
        true
    }
}

fn scan_pair(sim: &Sim, travel_yaw: f64) -> Vec<DepthScan> {
    let mut out = Vec::with_capacity(2);
    for yaw in [travel_yaw, travel_yaw - FRAC_PI_2] {
        let pose = crate::geometry::Pose { position: sim.robot.position(), yaw_rad: yaw };
        if let Ok(s) = simulate_depth(&sim.active, pose, ScanParams::default()) {
            out.push(s);
        }
    }
    out
}

fn wall_follow(sim: &mut Sim, trace: &mut TraceWriter) -> Result<ExploreReport, ExploreError> {
    let truth = rasterize(sim.scenario, false);
    let mut mapper = Mapper {
        memory: OccupancyGrid::new(
            truth.width,
            truth.height,
            truth.cell_size_m,
            truth.origin,
            CellState::Unknown,
        ),
        version: 0,
    };

    // initial sweep: eight headings cover the full circle
    for k in 0..8 {
        let yaw = k as f64 * PI / 4.0;
        if rotate_to(sim, trace, yaw) == GotoOutcome::Budget {
            return finish(sim, mapper, false, truth);
        }
        for s in scan_pair(sim, yaw) {
            mapper.integrate(&s);
        }
    }

    let cell_of = |g: &OccupancyGrid, p: Point| g.world_to_cell(p);
    let center_of =
        |g: &OccupancyGrid, c: (i64, i64)| g.cell_center(c.0 as usize, c.1 as usize);

    // stand somewhere walkable before following
    if !mapper.walkable(sim.robot.position()) {
        if let Some(p) = nearest_walkable(&mapper, sim.robot.position(), 1.5) {
            let _ = goto(sim, trace, p, 0.03, 400);
            for s in scan_pair(sim, sim.robot.pose.yaw_rad) {
                mapper.integrate(&s);
            }
        }
    }

    let Some(start_cell) = cell_of(&mapper.memory, sim.robot.position()) else {
        return finish(sim, mapper, false, truth);
    };
    let mut pos = (start_cell.0 as i64, start_cell.1 as i64);
    let mut h: u8 = 0;

    // acquire: drive forward until the cell ahead is not walkable, then
    // turn right so the obstruction sits on the robot's left
    for _ in 0..600 {
        if !sim.budget_left() {
            return finish(sim, mapper, false, truth);
        }
        let (dx, dy) = heading_delta(h);
        let front = (pos.0 + dx, pos.1 + dy);
        if !mapper.walkable(center_of(&mapper.memory, front)) {
            break;
        }
        if !advance(sim, trace, &mut mapper, &mut pos, front, h) {
            break;
        }
    }
    h = (h + 3) % 4;
    let _ = rotate_to(sim, trace, heading_yaw(h));
    for s in scan_pair(sim, heading_yaw(h)) {
        mapper.integrate(&s);
    }

    // left-hand boundary tour with information-stable loop closure
    let mut visited: HashMap<(i64, i64, u8), u64> = HashMap::new();
    let mut loop_closed = false;
    for _ in 0..200_000 {
        if !sim.budget_left() {
            break;
        }
        match visited.get(&(pos.0, pos.1, h)) {
            Some(&v) if v == mapper.version => {
                loop_closed = true;
                break;
            }
            _ => {
                visited.insert((pos.0, pos.1, h), mapper.version);
            }
        }
        let left = (h + 1) % 4;
        let (lx, ly) = heading_delta(left);
        let (fx, fy) = heading_delta(h);
        let left_cell = (pos.0 + lx, pos.1 + ly);
        let front_cell = (pos.0 + fx, pos.1 + fy);
        if mapper.walkable(center_of(&mapper.memory, left_cell)) {
            h = left;
            if !advance(sim, trace, &mut mapper, &mut pos, left_cell, h) {
                continue;
            }
        } else if mapper.walkable(center_of(&mapper.memory, front_cell)) {
            if !advance(sim, trace, &mut mapper, &mut pos, front_cell, h) {
                continue;
            }
        } else {
            h = (h + 3) % 4;
            let _ = rotate_to(sim, trace, heading_yaw(h));
            for s in scan_pair(sim, heading_yaw(h)) {
                mapper.integrate(&s);
            }
        }
    }
    finish(sim, mapper, loop_closed, truth)
}

/// Drive one cell step; on contact or failure, mark the target cell as
/// obstructed so the follower routes around it.
fn advance(
    sim: &mut Sim,
    trace: &mut TraceWriter,
    mapper: &mut Mapper,
    pos: &mut (i64, i64),
    to: (i64, i64),
    h: u8,
) -> bool {
    let target = mapper.memory.cell_center(to.0 as usize, to.1 as usize);
    match goto(sim, trace, target, 0.03, 150) {
        GotoOutcome::Reached => {
            *pos = to;
            for s in scan_pair(sim, heading_yaw(h)) {
                mapper.integrate(&s);
            }
            true
        }
        GotoOutcome::Budget => false,
        GotoOutcome::Collided | GotoOutcome::Stuck => {
            mapper.mark(to.0 as usize, to.1 as usize, CellState::Occupied);
            // retreat to the cell center we came from
            let back = mapper.memory.cell_center(pos.0 as usize, pos.1 as usize);
            let _ = goto(sim, trace, back, 0.05, 150);
            false
        }
    }
}

fn nearest_walkable(mapper: &Mapper, p: Point, radius_m: f64) -> Option<Point> {
    let g = &mapper.memory;
    let mut best: Option<(f64, Point)> = None;
    if let Some((cx, cy)) = g.world_to_cell(p) {
        let reach = (radius_m / g.cell_size_m).ceil() as i64;
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let (ix, iy) = (cx as i64 + dx, cy as i64 + dy);
                if ix < 0 || iy < 0 || ix >= g.width as i64 || iy >= g.height as i64 {
                    continue;
                }
                let c = g.cell_center(ix as usize, iy as usize);
                let d = c.dist(p);
                if d <= radius_m
                    && mapper.walkable(c)
                    && best.map_or(true, |(bd, _)| d < bd)
                {
                    best = Some((d, c));
                }
            }
        }
    }
    best.map(|(_, c)| c)
}

fn finish(
    sim: &Sim,
    mapper: Mapper,
    loop_closed: bool,
    truth: OccupancyGrid,
) -> Result<ExploreReport, ExploreError> {
    let mut seen = 0usize;
    let mut total = 0usize;
    for (ix, iy, s) in truth.iter_cells() {
        if s == CellState::Free {
            total += 1;
            if mapper.memory.get(ix, iy) == CellState::Free {
                seen += 1;
            }
        }
    }
    let coverage = if total == 0 { 0.0 } else { seen as f64 / total as f64 };
    if !loop_closed && !sim.budget_left() && coverage < 0.5 {
        return Err(ExploreError::InsufficientCoverage { coverage_pct: coverage * 100.0 });
    }
    Ok(ExploreReport { memory: mapper.memory, loop_closed, coverage })
}
