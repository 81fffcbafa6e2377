//! Simulated planar depth sensing by DDA ray marching over the grid.

use crate::geometry::{Point, Pose};
use crate::grid::{CellState, OccupancyGrid};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScanParams {
    pub fov_rad: f64,
    pub n_rays: usize,
    pub max_range_m: f64,
}

impl Default for ScanParams {
    fn default() -> Self {
        Self {
            fov_rad: std::f64::consts::FRAC_PI_2,
            n_rays: 120,
            max_range_m: 5.0,
        }
    }
}

/// One planar depth sweep. Ray 0 points at `yaw - fov/2`, the last ray at
/// `yaw + fov/2`; a single-ray scan points straight along `yaw`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DepthScan {
    pub pose: Pose,
    pub fov_rad: f64,
    pub n_rays: usize,
    pub max_range_m: f64,
    pub ranges: Vec<f64>,
}

impl DepthScan {
    pub fn bearing(&self, i: usize) -> f64 {
        if self.n_rays <= 1 {
            self.pose.yaw_rad
        } else {
            self.pose.yaw_rad - self.fov_rad / 2.0
                + self.fov_rad * i as f64 / (self.n_rays - 1) as f64
        }
    }

    /// World point where ray `i` hit, or None when it reached max range.
    pub fn hit_point(&self, i: usize) -> Option<Point> {
        (self.ranges[i] < self.max_range_m - 1e-12)
            .then(|| self.pose.position.polar(self.bearing(i), self.ranges[i]))
    }

    /// World endpoint of ray `i` regardless of whether it hit.
    pub fn end_point(&self, i: usize) -> Point {
        self.pose.position.polar(self.bearing(i), self.ranges[i])
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SensorError {
    #[error("sensor pose not in free space")]
    PoseNotFree,
}

/// Distance from `origin` along `bearing` to the first Occupied cell
/// boundary, capped at `max_range`. Unknown cells do not stop the ray.
pub fn cast_ray(grid: &OccupancyGrid, origin: Point, bearing: f64, max_range: f64) -> f64 {
    let dir = (bearing.cos(), bearing.sin());
    let cell = grid.cell_size_m;
    let fx = (origin.x - grid.origin.x) / cell;
    let fy = (origin.y - grid.origin.y) / cell;
    let (mut ix, mut iy) = (fx.floor() as i64, fy.floor() as i64);

    let (step_x, mut t_max_x, t_delta_x) = axis_setup(fx, dir.0, cell);
    let (step_y, mut t_max_y, t_delta_y) = axis_setup(fy, dir.1, cell);

    loop {
        let t;
        if t_max_x <= t_max_y {
            t = t_max_x;
            ix += step_x;
            t_max_x += t_delta_x;
        } else {
            t = t_max_y;
            iy += step_y;
            t_max_y += t_delta_y;
        }
        if t > max_range {
            return max_range;
        }
        if ix < 0 || iy < 0 || ix >= grid.width as i64 || iy >= grid.height as i64 {
            return max_range;
        }
        if grid.get(ix as usize, iy as usize) == CellState::Occupied {
            return t;
        }
    }
}

/// Per-axis DDA state: step direction, ray length to the first grid line,
/// and ray length between successive grid lines.
fn axis_setup(frac: f64, dir: f64, cell: f64) -> (i64, f64, f64) {
    if dir > 1e-15 {
        let t0 = (frac.floor() + 1.0 - frac) * cell / dir;
        (1, t0, cell / dir)
    } else if dir < -1e-15 {
        let t0 = (frac - frac.floor()) * cell / -dir;
        (-1, t0, cell / -dir)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

/// Simulate one depth sweep from `pose`. Errors if the pose cell is not Free.
pub fn simulate_depth(
    grid: &OccupancyGrid,
    pose: Pose,
    params: ScanParams,
) -> Result<DepthScan, SensorError> {
    if grid.state_at(pose.position) != CellState::Free {
        return Err(SensorError::PoseNotFree);
    }
    let mut scan = DepthScan {
        pose,
        fov_rad: params.fov_rad,
        n_rays: params.n_rays,
        max_range_m: params.max_range_m,
        ranges: Vec::with_capacity(params.n_rays),
    };
    for i in 0..params.n_rays {
        let b = scan.bearing(i);
        scan.ranges
            .push(cast_ray(grid, pose.position, b, params.max_range_m));
    }
    Ok(scan)
}
