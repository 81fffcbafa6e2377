//! 8-connected grid search with exact step-count costs.
//!
//! Path costs are kept as (straight, diagonal) step counts and compared in
//! integer arithmetic, so optimality and determinism never hinge on float
//! rounding; a cost only becomes meters at the very end.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Exact cost of an 8-connected grid path: value = straight + diag * sqrt(2),
/// in cell units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GridCost {
    pub straight: u32,
    pub diag: u32,
}

impl GridCost {
    pub const ZERO: GridCost = GridCost {
        straight: 0,
        diag: 0,
    };

    pub fn meters(self, cell_size_m: f64) -> f64 {
        (self.straight as f64 + self.diag as f64 * std::f64::consts::SQRT_2) * cell_size_m
    }

    pub fn plus(self, o: GridCost) -> GridCost {
        GridCost {
            straight: self.straight + o.straight,
            diag: self.diag + o.diag,
        }
    }

    /// Octile distance between two cells.
    pub fn octile(a: (usize, usize), b: (usize, usize)) -> GridCost {
        let dx = a.0.abs_diff(b.0) as u32;
        let dy = a.1.abs_diff(b.1) as u32;
        GridCost {
            straight: dx.max(dy) - dx.min(dy),
            diag: dx.min(dy),
        }
    }
}

impl Ord for GridCost {
    fn cmp(&self, o: &Self) -> Ordering {
        // self (<,=,>) o  <=>  da (<,=,>) db*sqrt(2),
        // da = self.straight - o.straight, db = o.diag - self.diag
        let da = self.straight as i128 - o.straight as i128;
        let db = o.diag as i128 - self.diag as i128;
        if da == 0 && db == 0 {
            return Ordering::Equal;
        }
        // sqrt(2) is irrational, so nonzero (da, db) can never be equal
        let less = match db.cmp(&0) {
            Ordering::Greater => da <= 0 || da * da < 2 * db * db,
            Ordering::Equal => da < 0,
            Ordering::Less => da < 0 && da * da > 2 * db * db,
        };
        if less {
            Ordering::Less
        } else {
            Ordering::Greater
        }
    }
}

impl PartialOrd for GridCost {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

#[derive(Debug, Clone)]
pub struct GridPath {
    /// Cells from start to goal inclusive.
    pub cells: Vec<(usize, usize)>,
    pub cost: GridCost,
}

const DIRS: [(i64, i64); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

#[derive(PartialEq, Eq)]
struct HeapEntry {
    f: GridCost,
    idx: u32,
}

impl Ord for HeapEntry {
    fn cmp(&self, o: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert so the smallest (f, idx) pops first
        o.f.cmp(&self.f).then(o.idx.cmp(&self.idx))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// A* over an 8-connected grid. Diagonal moves cost sqrt(2) and are refused
/// when either adjacent orthogonal cell is blocked (no corner cutting).
/// With `use_heuristic` false this is plain Dijkstra.
pub fn astar(
    width: usize,
    height: usize,
    traversable: &dyn Fn(usize, usize) -> bool,
    start: (usize, usize),
    goal: (usize, usize),
    use_heuristic: bool,
) -> Option<GridPath> {
    if start.0 >= width || start.1 >= height || goal.0 >= width || goal.1 >= height {
        return None;
    }
    if !traversable(start.0, start.1) || !traversable(goal.0, goal.1) {
        return None;
    }
    let n = width * height;
    let cell_idx = |x: usize, y: usize| y * width + x;
    let mut best: Vec<Option<GridCost>> = vec![None; n];
    let mut parent: Vec<u32> = vec![u32::MAX; n];
    let mut closed = vec![false; n];
    let mut heap = BinaryHeap::new();
    best[cell_idx(start.0, start.1)] = Some(GridCost::ZERO);
    heap.push(HeapEntry {
        f: if use_heuristic {
            GridCost::octile(start, goal)
        } else {
            GridCost::ZERO
        },
        idx: cell_idx(start.0, start.1) as u32,
    });

    while let Some(HeapEntry { idx, .. }) = heap.pop() {
        let idx = idx as usize;
        if closed[idx] {
            continue;
        }
        closed[idx] = true;
        let (x, y) = (idx % width, idx / width);
        if (x, y) == goal {
            let mut cells = vec![(x, y)];
            let mut cur = idx;
            while parent[cur] != u32::MAX {
                cur = parent[cur] as usize;
                cells.push((cur % width, cur / width));
            }
            cells.reverse();
            return Some(GridPath {
                cells,
                cost: best[idx].unwrap(),
            });
        }
        let g = best[idx].unwrap();
        for (dx, dy) in DIRS {
            let nx = x as i64 + dx;
            let ny = y as i64 + dy;
            if nx < 0 || ny < 0 || nx >= width as i64 || ny >= height as i64 {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if !traversable(nx, ny) {
                continue;
            }
            let diagonal = dx != 0 && dy != 0;
            if diagonal && (!traversable(nx, y) || !traversable(x, ny)) {
                continue;
            }
            let step = if diagonal {
                GridCost { straight: 0, diag: 1 }
            } else {
                GridCost { straight: 1, diag: 0 }
            };
            let ng = g.plus(step);
            let nidx = cell_idx(nx, ny);
            if best[nidx].map_or(true, |old| ng < old) {
                best[nidx] = Some(ng);
                parent[nidx] = idx as u32;
                let f = if use_heuristic {
                    ng.plus(GridCost::octile((nx, ny), goal))
                } else {
                    ng
                };
                heap.push(HeapEntry {
                    f,
                    idx: nidx as u32,
                });
            }
        }
    }
    None
}
