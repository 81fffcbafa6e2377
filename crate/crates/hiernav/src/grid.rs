//! Occupancy grid: rasterization of scenarios, inflation, and collision tests.

use crate::geometry::{Point, Rect};
use crate::scenario::{Scenario, SharedBoundary, WALL_HALF_M};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellState {
    Free,
    Occupied,
    Unknown,
}

/// Axis-aligned occupancy grid. Cell (0, 0) covers the square starting at
/// `origin`; cell (ix, iy) spans `[origin + i*cell, origin + (i+1)*cell)`.
#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    pub cell_size_m: f64,
    pub width: usize,
    pub height: usize,
    pub origin: Point,
    cells: Vec<CellState>,
}

impl OccupancyGrid {
    pub fn new(
        width: usize,
        height: usize,
        cell_size_m: f64,
        origin: Point,
        fill: CellState,
    ) -> Self {
        Self {
            cell_size_m,
            width,
            height,
            origin,
            cells: vec![fill; width * height],
        }
    }

    fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    pub fn get(&self, ix: usize, iy: usize) -> CellState {
        if ix < self.width && iy < self.height {
            self.cells[self.idx(ix, iy)]
        } else {
            CellState::Unknown
        }
    }

    pub fn set(&mut self, ix: usize, iy: usize, s: CellState) {
        if ix < self.width && iy < self.height {
            let i = self.idx(ix, iy);
            self.cells[i] = s;
        }
    }

    pub fn world_to_cell(&self, p: Point) -> Option<(usize, usize)> {
        let fx = (p.x - self.origin.x) / self.cell_size_m;
        let fy = (p.y - self.origin.y) / self.cell_size_m;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
        (ix < self.width && iy < self.height).then_some((ix, iy))
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point {
        Point::new(
            self.origin.x + (ix as f64 + 0.5) * self.cell_size_m,
            self.origin.y + (iy as f64 + 0.5) * self.cell_size_m,
        )
    }

    /// State of the cell containing `p`; Unknown outside the grid.
    pub fn state_at(&self, p: Point) -> CellState {
        match self.world_to_cell(p) {
            Some((ix, iy)) => self.get(ix, iy),
            None => CellState::Unknown,
        }
    }

    pub fn is_free_at(&self, p: Point) -> bool {
        self.state_at(p) == CellState::Free
    }

    pub fn count(&self, s: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == s).count()
    }

    /// Free area in square meters.
    pub fn free_area_m2(&self) -> f64 {
        self.count(CellState::Free) as f64 * self.cell_size_m * self.cell_size_m
    }

    pub fn iter_cells(&self) -> impl Iterator<Item = (usize, usize, CellState)> + '_ {
        (0..self.height)
            .flat_map(move |iy| (0..self.width).map(move |ix| (ix, iy, self.get(ix, iy))))
    }

    /// Distance from `p` to the nearest point of the cell square (ix, iy).
    fn dist_to_cell(&self, p: Point, ix: usize, iy: usize) -> f64 {
        let x0 = self.origin.x + ix as f64 * self.cell_size_m;
        let y0 = self.origin.y + iy as f64 * self.cell_size_m;
        let dx = (x0 - p.x).max(p.x - (x0 + self.cell_size_m)).max(0.0);
        let dy = (y0 - p.y).max(p.y - (y0 + self.cell_size_m)).max(0.0);
        (dx * dx + dy * dy).sqrt()
    }

    /// True if a disc at `center` overlaps any Occupied cell square.
    pub fn disc_collides(&self, center: Point, radius_m: f64) -> bool {
        let lo_x = ((center.x - radius_m - self.origin.x) / self.cell_size_m).floor() as i64;
        let hi_x = ((center.x + radius_m - self.origin.x) / self.cell_size_m).floor() as i64;
        let lo_y = ((center.y - radius_m - self.origin.y) / self.cell_size_m).floor() as i64;
        let hi_y = ((center.y + radius_m - self.origin.y) / self.cell_size_m).floor() as i64;
        for iy in lo_y.max(0)..=hi_y.min(self.height as i64 - 1) {
            for ix in lo_x.max(0)..=hi_x.min(self.width as i64 - 1) {
                let (ix, iy) = (ix as usize, iy as usize);
                if self.get(ix, iy) == CellState::Occupied
                    && self.dist_to_cell(center, ix, iy) < radius_m
                {
                    return true;
                }
            }
        }
        false
    }

    /// Dilate Occupied cells: any cell whose center a disc of `radius_m`
    /// could not occupy without overlapping an Occupied square turns Occupied.
    /// Other states are preserved.
    pub fn inflate(&self, radius_m: f64) -> OccupancyGrid {
        let mut out = self.clone();
        for (ix, iy, s) in self.iter_cells() {
            if s != CellState::Occupied && self.disc_collides(self.cell_center(ix, iy), radius_m) {
                out.set(ix, iy, CellState::Occupied);
            }
        }
        out
    }

    /// Mark every cell whose center lies inside `rect` with `s`.
    pub fn paint_rect(&mut self, rect: Rect, s: CellState) {
        for iy in 0..self.height {
            for ix in 0..self.width {
                if rect.contains(self.cell_center(ix, iy)) {
                    self.set(ix, iy, s);
                }
            }
        }
    }
}

/// Rasterize a scenario onto a grid anchored at the world origin: room
/// interiors Free, walls (room boundaries minus door gaps) and blocking
/// objects Occupied, everything outside rooms Unknown.
pub fn rasterize(s: &Scenario, include_dynamic: bool) -> OccupancyGrid {
    let cell = s.cell_size_m;
    let width = (s.bounds_m[0] / cell).ceil() as usize;
    let height = (s.bounds_m[1] / cell).ceil() as usize;
    let mut g = OccupancyGrid::new(width, height, cell, Point::new(0.0, 0.0), CellState::Unknown);

    for room in &s.rooms {
        let interior = room.rect.expand(-WALL_HALF_M);
        for iy in 0..height {
            for ix in 0..width {
                let c = g.cell_center(ix, iy);
                if room.rect.contains(c) {
                    let st = if interior.contains(c) {
                        CellState::Free
                    } else {
                        CellState::Occupied
                    };
                    g.set(ix, iy, st);
                }
            }
        }
    }

    for d in &s.doors {
        let (Some(a), Some(b)) = (s.room(d.connects[0]), s.room(d.connects[1])) else {
            continue;
        };
        let Some(sb) = crate::scenario::shared_boundary(&a.rect, &b.rect) else {
            continue;
        };
        clear_door_gap(&mut g, sb, d.position, d.width_m);
    }

    for o in &s.objects {
        if o.blocking {
            g.paint_rect(o.rect, CellState::Occupied);
        }
    }
    if include_dynamic {
        for ob in &s.dynamic_obstacles {
            g.paint_rect(ob.rect, CellState::Occupied);
        }
    }
    g
}

/// Free the wall cells of a door gap. Along the boundary tangent, only cells
/// whose full extent lies inside the gap interval are cleared, so the
/// effective opening is the declared width rounded down to whole cells.
fn clear_door_gap(g: &mut OccupancyGrid, sb: SharedBoundary, position: Point, width_m: f64) {
    for (ix, iy) in door_gap_cells(g, sb, position, width_m) {
        g.set(ix, iy, CellState::Free);
    }
}

/// Cells of a door's gap band: within the wall band across the shared
/// boundary, with their full tangent extent inside the gap interval.
pub fn door_gap_cells(
    g: &OccupancyGrid,
    sb: SharedBoundary,
    position: Point,
    width_m: f64,
) -> Vec<(usize, usize)> {
    let cell = g.cell_size_m;
    let (line, t) = match sb {
        SharedBoundary::Vertical { line, .. } => (line, position.y),
        SharedBoundary::Horizontal { line, .. } => (line, position.x),
    };
    let (t_lo, t_hi) = (t - width_m / 2.0, t + width_m / 2.0);
    let mut out = Vec::new();
    for iy in 0..g.height {
        for ix in 0..g.width {
            let c = g.cell_center(ix, iy);
            let (normal, tangent) = match sb {
                SharedBoundary::Vertical { .. } => (c.x, c.y),
                SharedBoundary::Horizontal { .. } => (c.y, c.x),
            };
            let in_band = (normal - line).abs() < WALL_HALF_M;
            let t0 = tangent - cell / 2.0;
            let t1 = tangent + cell / 2.0;
            if in_band && t0 >= t_lo - 1e-9 && t1 <= t_hi + 1e-9 {
                out.push((ix, iy));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use crate::scenario::{Door, DynamicObstacle, Room, Scenario};

    pub(crate) fn fixture3r() -> Scenario {
        Scenario {
            name: "fixture3r".into(),
            cell_size_m: 0.1,
            bounds_m: [12.0, 4.0],
            rooms: vec![
                Room {
                    id: 0,
                    label: "living room".into(),
                    rect: Rect::new(0.0, 0.0, 4.0, 4.0),
                },
                Room {
                    id: 1,
                    label: "hall".into(),
                    rect: Rect::new(4.0, 0.0, 8.0, 4.0),
                },
                Room {
                    id: 2,
                    label: "kitchen".into(),
                    rect: Rect::new(8.0, 0.0, 12.0, 4.0),
                },
            ],
            doors: vec![
                Door {
                    id: "d0".into(),
                    connects: [0, 1],
                    position: Point::new(4.0, 2.0),
                    width_m: 0.9,
                },
                Door {
                    id: "d1".into(),
                    connects: [1, 2],
                    position: Point::new(8.0, 2.0),
                    width_m: 0.9,
                },
            ],
            objects: vec![],
            dynamic_obstacles: vec![],
            start: Pose::xy(1.0, 2.0, 0.0),
            tasks: vec![],
        }
    }

    #[test]
    fn corridor_between_aligned_doors_is_free() {
        let g = rasterize(&fixture3r(), false);
        let mut x = 1.0;
        while x <= 10.0 {
            assert!(
                g.is_free_at(Point::new(x, 2.0)),
                "cell at ({x}, 2.0) not free"
            );
            x += 0.05;
        }
    }

    #[test]
    fn walls_and_outside() {
        let g = rasterize(&fixture3r(), false);
        assert_eq!(g.state_at(Point::new(0.05, 2.0)), CellState::Occupied);
        assert_eq!(g.state_at(Point::new(4.0, 0.5)), CellState::Occupied);
        assert_eq!(g.state_at(Point::new(-1.0, 2.0)), CellState::Unknown);
        assert_eq!(g.state_at(Point::new(100.0, 2.0)), CellState::Unknown);
    }

    #[test]
    fn dynamic_obstacle_flag() {
        let mut s = fixture3r();
        s.dynamic_obstacles.push(DynamicObstacle {
            rect: Rect::new(5.5, 1.5, 6.5, 2.5),
            spawn_after_mapping: true,
        });
        let with = rasterize(&s, true);
        let without = rasterize(&s, false);
        assert_eq!(with.state_at(Point::new(6.0, 2.0)), CellState::Occupied);
        assert_eq!(without.state_at(Point::new(6.0, 2.0)), CellState::Free);
    }

    #[test]
    fn door_gap_width_admits_robot() {
        let g = rasterize(&fixture3r(), false);
        let free_rows: Vec<usize> = (0..g.height)
            .filter(|&iy| g.get(39, iy) == CellState::Free && g.get(40, iy) == CellState::Free)
            .collect();
        assert_eq!(free_rows, vec![16, 17, 18, 19, 20, 21, 22, 23]);
    }

    #[test]
    fn inflation_leaves_door_corridor() {
        let g = rasterize(&fixture3r(), false).inflate(0.2);
        let free_rows: Vec<usize> = (0..g.height)
            .filter(|&iy| g.get(39, iy) == CellState::Free && g.get(40, iy) == CellState::Free)
            .collect();
        assert_eq!(free_rows, vec![18, 19, 20, 21]);
    }

    #[test]
    fn disc_collision_against_wall() {
        let g = rasterize(&fixture3r(), false);
        assert!(!g.disc_collides(Point::new(2.0, 2.0), 0.2));
        assert!(g.disc_collides(Point::new(0.25, 2.0), 0.2));
        assert!(!g.disc_collides(Point::new(0.35, 2.0), 0.2));
    }

    #[test]
    fn world_cell_round_trip() {
        let g = rasterize(&fixture3r(), false);
        for &(x, y) in &[(0.01, 0.01), (3.99, 3.99), (6.0, 2.0), (11.95, 0.05)] {
            let p = Point::new(x, y);
            let (ix, iy) = g.world_to_cell(p).unwrap();
            let c = g.cell_center(ix, iy);
            assert!(p.dist(c) <= g.cell_size_m);
        }
        assert_eq!(g.world_to_cell(Point::new(-0.1, 0.0)), None);
        assert_eq!(g.world_to_cell(Point::new(12.01, 0.0)), None);
    }
}
