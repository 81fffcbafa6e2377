//! Ego-centric local planning: fuse map memory with fresh depth into a
//! robot-centered costmap window, then search and smooth dense waypoints
//! toward the projected next global waypoint.

use crate::geometry::{Point, Pose};
use crate::grid::{CellState, OccupancyGrid};
use crate::pathfind::astar;
use crate::sensor::DepthScan;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LocalParams {
    /// Window side length in meters.
    pub window_m: f64,
    pub cell_m: f64,
    /// Dense waypoint spacing along the smoothed path.
    pub spacing_m: f64,
    /// Distance at which a waypoint or segment end counts as reached.
    pub arrival_m: f64,
    /// Inflation radius around sensed/memory obstacles. Slightly above the
    /// robot radius to absorb cell quantization and steering arcs.
    pub inflate_m: f64,
    /// Conflict detection horizon.
    pub lookahead_m: f64,
}

impl Default for LocalParams {
    fn default() -> Self {
        Self {
            window_m: 5.0,
            cell_m: 0.05,
            spacing_m: 0.5,
            arrival_m: 0.5,
            inflate_m: 0.26,
            lookahead_m: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmState {
    Free,
    /// Unknown in memory, treated as traversable.
    UnknownFree,
    Inflated,
    Occupied,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Memory,
    Sensed,
}

/// Square costmap window centered on the robot, axis-aligned in the world
/// frame. The center cell's center coincides with the robot position.
#[derive(Debug, Clone)]
pub struct LocalCostmap {
    pub center: Point,
    pub cell_size_m: f64,
    /// Cells per side (odd).
    pub n: usize,
    origin: Point,
    states: Vec<CmState>,
    prov: Vec<Provenance>,
}

impl LocalCostmap {
    pub fn state(&self, ix: usize, iy: usize) -> CmState {
        self.states[iy * self.n + ix]
    }

    pub fn provenance(&self, ix: usize, iy: usize) -> Provenance {
        self.prov[iy * self.n + ix]
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point {
        Point::new(
            self.origin.x + (ix as f64 + 0.5) * self.cell_size_m,
            self.origin.y + (iy as f64 + 0.5) * self.cell_size_m,
        )
    }

    pub fn world_to_cell(&self, p: Point) -> Option<(usize, usize)> {
        let fx = (p.x - self.origin.x) / self.cell_size_m;
        let fy = (p.y - self.origin.y) / self.cell_size_m;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
        (ix < self.n && iy < self.n).then_some((ix, iy))
    }

    pub fn center_cell(&self) -> (usize, usize) {
        (self.n / 2, self.n / 2)
    }

    pub fn state_at(&self, p: Point) -> Option<CmState> {
        self.world_to_cell(p).map(|(ix, iy)| self.state(ix, iy))
    }

    fn traversable_plain(&self, ix: usize, iy: usize) -> bool {
        matches!(self.state(ix, iy), CmState::Free | CmState::UnknownFree)
    }

    fn dist_to_cell(&self, p: Point, ix: usize, iy: usize) -> f64 {
        let x0 = self.origin.x + ix as f64 * self.cell_size_m;
        let y0 = self.origin.y + iy as f64 * self.cell_size_m;
        let dx = (x0 - p.x).max(p.x - (x0 + self.cell_size_m)).max(0.0);
        let dy = (y0 - p.y).max(p.y - (y0 + self.cell_size_m)).max(0.0);
        (dx * dx + dy * dy).sqrt()
    }
}

/// Fuse memory and depth scans into a costmap: window cells start from the
/// memory map (Unknown as traversable), scan rays carve Sensed Free along
/// their flight and mark Sensed Occupied at hits, then obstacles inflate.
pub fn build_local_costmap(
    scans: &[DepthScan],
    memory: &OccupancyGrid,
    pose: Pose,
    params: &LocalParams,
) -> LocalCostmap {
    let n = ((params.window_m / params.cell_m).round() as usize) | 1;
    let cell = params.cell_m;
    let center = pose.position;
    let origin = Point::new(
        center.x - (n as f64 / 2.0) * cell,
        center.y - (n as f64 / 2.0) * cell,
    );
    let mut cm = LocalCostmap {
        center,
        cell_size_m: cell,
        n,
        origin,
        states: vec![CmState::UnknownFree; n * n],
        prov: vec![Provenance::Memory; n * n],
    };
    for iy in 0..n {
        for ix in 0..n {
            let st = match memory.state_at(cm.cell_center(ix, iy)) {
                CellState::Occupied => CmState::Occupied,
                CellState::Free => CmState::Free,
                CellState::Unknown => CmState::UnknownFree,
            };
            cm.states[iy * n + ix] = st;
        }
    }

    // sensed free space first, then sensed hits on top
    for scan in scans {
        for i in 0..scan.n_rays {
            carve_ray(&mut cm, scan.pose.position, scan.bearing(i), scan.ranges[i]);
        }
    }
    for scan in scans {
        for i in 0..scan.n_rays {
            if let Some(hit) = scan.hit_point(i) {
                // a full-cell nudge so boundary-exact hits land inside
                let inside = hit.polar(scan.bearing(i), cell);
                if let Some((ix, iy)) = cm.world_to_cell(inside) {
                    cm.states[iy * n + ix] = CmState::Occupied;
                    cm.prov[iy * n + ix] = Provenance::Sensed;
                }
            }
        }
    }

    // inflate
    let occupied: Vec<(usize, usize)> = (0..n * n)
        .filter(|&i| cm.states[i] == CmState::Occupied)
        .map(|i| (i % n, i / n))
        .collect();
    let reach = (params.inflate_m / cell).ceil() as i64;
    for &(ox, oy) in &occupied {
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                let (ix, iy) = (ox as i64 + dx, oy as i64 + dy);
                if ix < 0 || iy < 0 || ix >= n as i64 || iy >= n as i64 {
                    continue;
                }
                let (ix, iy) = (ix as usize, iy as usize);
                if cm.states[iy * n + ix] == CmState::Occupied {
                    continue;
                }
                if cm.dist_to_cell(cm.cell_center(ix, iy), ox, oy) < params.inflate_m {
                    cm.states[iy * n + ix] = CmState::Inflated;
                }
            }
        }
    }
    cm
}

/// Mark cells along one ray as Sensed Free, up to (exclusive of) the hit.
fn carve_ray(cm: &mut LocalCostmap, origin: Point, bearing: f64, range: f64) {
    let step = cm.cell_size_m / 2.0;
    let mut t = 0.0;
    let mut last = None;
    while t < range - 1e-9 {
        let p = origin.polar(bearing, t);
        if let Some((ix, iy)) = cm.world_to_cell(p) {
            if last != Some((ix, iy)) {
                cm.states[iy * cm.n + ix] = CmState::Free;
                cm.prov[iy * cm.n + ix] = Provenance::Sensed;
                last = Some((ix, iy));
            }
        }
        t += step;
    }
}

/// Project the next global waypoint into the window: clamped onto the
/// window boundary along the robot-to-waypoint bearing when it lies outside.
pub fn project_waypoint(v_next: Point, pose: Pose, params: &LocalParams) -> Point {
    let half = params.window_m / 2.0;
    let dx = v_next.x - pose.position.x;
    let dy = v_next.y - pose.position.y;
    let mut t = 1.0f64;
    if dx.abs() > half {
        t = t.min(half / dx.abs());
    }
    if dy.abs() > half {
        t = t.min(half / dy.abs());
    }
    Point::new(pose.position.x + dx * t, pose.position.y + dy * t)
}

/// Dense local plan: raw cell trajectory plus smoothed waypoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalPlan {
    /// The (possibly clamped) target in world coordinates.
    pub target: Point,
    /// Raw A* trajectory as window cells.
    pub trajectory: Vec<(usize, usize)>,
    /// Dense waypoints in world coordinates at `spacing_m` intervals.
    pub waypoints: Vec<Point>,
    /// Smoothed polyline vertices; executors should track this to keep the
    /// inflated clearance at corners.
    pub polyline: Vec<Point>,
    /// Length of the smoothed path in meters.
    pub length_m: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum LocalError {
    #[error("local blocked: no path to target within the window")]
    Blocked,
}

/// Radius around the robot inside which Inflated cells stay traversable, so
/// a robot grazing the inflation band can still plan its way out.
const ESCAPE_BUBBLE_M: f64 = 0.2;

/// A* from the window center to the target, with line-of-sight smoothing
/// and distance-based downsampling into waypoints.
pub fn plan_local(
    cm: &LocalCostmap,
    target: Point,
    params: &LocalParams,
) -> Result<LocalPlan, LocalError> {
    let start = cm.center_cell();
    let robot = cm.center;
    let trav = |ix: usize, iy: usize| match cm.state(ix, iy) {
        CmState::Free | CmState::UnknownFree => true,
        CmState::Inflated => cm.cell_center(ix, iy).dist(robot) <= ESCAPE_BUBBLE_M,
        CmState::Occupied => false,
    };

    let mut goal = cm
        .world_to_cell(target)
        .unwrap_or_else(|| clamp_cell(cm, target));
    if !cm.traversable_plain(goal.0, goal.1) {
        goal = nearest_plain_free(cm, target, params.spacing_m).ok_or(LocalError::Blocked)?;
    }

    let path = astar(cm.n, cm.n, &trav, start, goal, true).ok_or(LocalError::Blocked)?;
    Ok(finish_plan(cm, params, target, path.cells, &trav))
}

/// Search in the window for the traversable cell nearest the (possibly far)
/// goal and plan to it: a receding-horizon step that seeks doors around
/// walls where straight-bearing projection would dead-end. Blocked when no
/// reachable cell improves on the robot's own distance to the goal.
pub fn plan_toward(
    cm: &LocalCostmap,
    goal: Point,
    params: &LocalParams,
) -> Result<LocalPlan, LocalError> {
    let start = cm.center_cell();
    let robot = cm.center;
    let trav = |ix: usize, iy: usize| match cm.state(ix, iy) {
        CmState::Free | CmState::UnknownFree => true,
        CmState::Inflated => cm.cell_center(ix, iy).dist(robot) <= ESCAPE_BUBBLE_M,
        CmState::Occupied => false,
    };

    // flood the reachable set from the center
    let mut seen = vec![false; cm.n * cm.n];
    let mut queue = std::collections::VecDeque::new();
    seen[start.1 * cm.n + start.0] = true;
    queue.push_back(start);
    let mut best: Option<((usize, usize), f64)> = None;
    while let Some((ix, iy)) = queue.pop_front() {
        // escape-bubble cells are routable but never chosen as destination
        if cm.traversable_plain(ix, iy) {
            let d = cm.cell_center(ix, iy).dist(goal);
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some(((ix, iy), d));
            }
        }
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let (nx, ny) = (ix as i64 + dx, iy as i64 + dy);
                if nx < 0 || ny < 0 || nx >= cm.n as i64 || ny >= cm.n as i64 {
                    continue;
                }
                let (nx, ny) = (nx as usize, ny as usize);
                if !seen[ny * cm.n + nx] && trav(nx, ny) {
                    seen[ny * cm.n + nx] = true;
                    queue.push_back((nx, ny));
                }
            }
        }
    }

    let (cell, best_d) = best.ok_or(LocalError::Blocked)?;
    if best_d >= robot.dist(goal) - params.arrival_m / 10.0 {
        return Err(LocalError::Blocked);
    }
    let target = cm.cell_center(cell.0, cell.1);
    let path = astar(cm.n, cm.n, &trav, start, cell, true).ok_or(LocalError::Blocked)?;
    Ok(finish_plan(cm, params, target, path.cells, &trav))
}

/// Shared tail of local planning: line-of-sight smoothing over the raw cell
/// path, arc-length downsampling into dense waypoints.
fn finish_plan(
    cm: &LocalCostmap,
    params: &LocalParams,
    target: Point,
    cells: Vec<(usize, usize)>,
    trav: &dyn Fn(usize, usize) -> bool,
) -> LocalPlan {
    let pts: Vec<Point> = cells
        .iter()
        .map(|&(ix, iy)| cm.cell_center(ix, iy))
        .collect();
    let mut smooth = vec![pts[0]];
    let mut i = 0;
    while i + 1 < pts.len() {
        let mut j = pts.len() - 1;
        while j > i + 1 && !line_of_sight(cm, pts[i], pts[j], trav) {
            j -= 1;
        }
        smooth.push(pts[j]);
        i = j;
    }

    let length_m: f64 = smooth.windows(2).map(|w| w[0].dist(w[1])).sum();

    // downsample: one waypoint per spacing_m of arc length, plus the endpoint
    let mut waypoints = Vec::new();
    let mut next_at = params.spacing_m;
    let mut walked = 0.0;
    for w in smooth.windows(2) {
        let (a, b) = (w[0], w[1]);
        let seg = a.dist(b);
        if seg < 1e-12 {
            continue;
        }
        while next_at < walked + seg - 1e-9 {
            let t = (next_at - walked) / seg;
            let p = Point::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t);
            if cm
                .world_to_cell(p)
                .is_some_and(|(ix, iy)| cm.traversable_plain(ix, iy))
            {
                waypoints.push(p);
            }
            next_at += params.spacing_m;
        }
        walked += seg;
    }
    let end = *smooth.last().unwrap();
    if waypoints.last().map_or(true, |&w| w.dist(end) > 1e-9) {
        waypoints.push(end);
    }

    LocalPlan {
        target,
        trajectory: cells,
        waypoints,
        polyline: smooth,
        length_m,
    }
}

fn clamp_cell(cm: &LocalCostmap, p: Point) -> (usize, usize) {
    let fx = ((p.x - cm.origin.x) / cm.cell_size_m).floor();
    let fy = ((p.y - cm.origin.y) / cm.cell_size_m).floor();
    (
        (fx.max(0.0) as usize).min(cm.n - 1),
        (fy.max(0.0) as usize).min(cm.n - 1),
    )
}

/// Nearest plainly traversable cell within `radius` of a point.
fn nearest_plain_free(cm: &LocalCostmap, p: Point, radius: f64) -> Option<(usize, usize)> {
    let mut best: Option<((usize, usize), f64)> = None;
    for iy in 0..cm.n {
        for ix in 0..cm.n {
            if cm.traversable_plain(ix, iy) {
                let d = cm.cell_center(ix, iy).dist(p);
                if d <= radius && best.map_or(true, |(_, bd)| d < bd) {
                    best = Some(((ix, iy), d));
                }
            }
        }
    }
    best.map(|(c, _)| c)
}

/// DDA walk: every window cell crossed by the segment must be traversable.
fn line_of_sight(
    cm: &LocalCostmap,
    a: Point,
    b: Point,
    trav: &dyn Fn(usize, usize) -> bool,
) -> bool {
    let dist = a.dist(b);
    if dist < 1e-12 {
        return true;
    }
    let bearing = (b.y - a.y).atan2(b.x - a.x);
    let step = cm.cell_size_m / 4.0;
    let mut t = 0.0;
    while t <= dist {
        let p = a.polar(bearing, t);
        match cm.world_to_cell(p) {
            Some((ix, iy)) if trav(ix, iy) => {}
            _ => return false,
        }
        t += step;
    }
    match cm.world_to_cell(b) {
        Some((ix, iy)) => trav(ix, iy),
        None => false,
    }
}

/// Memory cells within the lookahead horizon where a scan hit contradicts
/// Memory-Free, deduplicated in hit order.
pub fn detect_conflict(
    scan: &DepthScan,
    memory: &OccupancyGrid,
    pose: Pose,
    lookahead_m: f64,
) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for i in 0..scan.n_rays {
        let Some(hit) = scan.hit_point(i) else {
            continue;
        };
        if pose.position.dist(hit) > lookahead_m {
            continue;
        }
        let inside = hit.polar(scan.bearing(i), memory.cell_size_m / 2.0);
        if memory.state_at(inside) == CellState::Free {
            if let Some(cell) = memory.world_to_cell(inside) {
                if !out.contains(&cell) {
                    out.push(cell);
                }
            }
        }
    }
    out
}
