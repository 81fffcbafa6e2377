//! Navigation metrics: oracle shortest paths on the static world and
//! success-rate / SPL aggregation.

use crate::geometry::Point;
use crate::grid::{rasterize, CellState, OccupancyGrid};
use crate::pathfind::astar;
use crate::robot::DEFAULT_ROBOT_RADIUS_M;
use crate::scenario::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("endpoint outside the traversable grid")]
    OutsideGrid,
    #[error("no path between start and goal on the static grid")]
    Disconnected,
}

/// Inflate the static grid by the robot radius for oracle queries.
pub fn oracle_grid(scenario: &Scenario) -> OccupancyGrid {
    rasterize(scenario, false).inflate(DEFAULT_ROBOT_RADIUS_M)
}

/// Shortest achievable path length in meters between two free points on an
/// inflated static grid, via 8-connected A* (diagonals cost sqrt(2) cells).
pub fn oracle_shortest(grid: &OccupancyGrid, start: Point, goal: Point) -> Result<f64, OracleError> {
    let s = nearest_free_cell(grid, start).ok_or(OracleError::OutsideGrid)?;
    let g = nearest_free_cell(grid, goal).ok_or(OracleError::OutsideGrid)?;
    if s == g {
        return Ok(0.0);
    }
    let trav = |ix: usize, iy: usize| grid.get(ix, iy) == CellState::Free;
    let path = astar(grid.width, grid.height, &trav, s, g, true).ok_or(OracleError::Disconnected)?;
    Ok(path.cost.meters(grid.cell_size_m))
}

/// The containing cell when Free, otherwise the nearest Free cell within a
/// half-meter ring (goals resolved onto object extents sit in inflated
/// halos after inflation).
fn nearest_free_cell(grid: &OccupancyGrid, p: Point) -> Option<(usize, usize)> {
    let (ix, iy) = grid.world_to_cell(p)?;
    if grid.get(ix, iy) == CellState::Free {
        return Some((ix, iy));
    }
    let r_cells = (0.5 / grid.cell_size_m).ceil() as i64;
    let mut best: Option<(f64, (usize, usize))> = None;
    for dy in -r_cells..=r_cells {
        for dx in -r_cells..=r_cells {
            let (jx, jy) = (ix as i64 + dx, iy as i64 + dy);
            if jx < 0 || jy < 0 || jx as usize >= grid.width || jy as usize >= grid.height {
                continue;
            }
            let (jx, jy) = (jx as usize, jy as usize);
            if grid.get(jx, jy) != CellState::Free {
                continue;
            }
            let d = grid.cell_center(jx, jy).dist(p);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, (jx, jy)));
            }
        }
    }
    best.map(|(_, c)| c)
}

/// One episode's inputs to the aggregate metrics.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeOutcome {
    pub success: bool,
    pub path_length_m: f64,
    pub oracle_length_m: Option<f64>,
}

impl EpisodeOutcome {
    /// success · l / max(p, l); zero for failures or missing oracles.
    pub fn spl_contrib(&self) -> f64 {
        match (self.success, self.oracle_length_m) {
            (true, Some(l)) => {
                if l <= 0.0 && self.path_length_m <= 0.0 {
                    1.0
                } else {
                    l / self.path_length_m.max(l)
                }
            }
            _ => 0.0,
        }
    }
}

/// (SR, SPL) over a nonempty episode batch.
pub fn compute_sr_spl(episodes: &[EpisodeOutcome]) -> (f64, f64) {
    assert!(!episodes.is_empty(), "metrics over an empty batch");
    let n = episodes.len() as f64;
    let sr = episodes.iter().filter(|e| e.success).count() as f64 / n;
    let spl = episodes.iter().map(|e| e.spl_contrib()).sum::<f64>() / n;
    (sr, spl)
}
