//! Seeded scenario generator: rooms tiled on a grid skeleton, a connected
//! door graph (spanning tree plus extras), one labeled object per room, and
//! a small task list. Deterministic for a fixed seed.

use crate::geometry::{Point, Pose, Rect};
use crate::robot::DEFAULT_ROBOT_RADIUS_M;
use crate::scenario::{Door, Instruction, ObjectSpec, Room, Scenario, DEFAULT_CELL_SIZE_M};
use crate::seeded::sub_rng;
use rand::seq::SliceRandom;
use rand::Rng;

pub const OBJECT_LABELS: [&str; 6] = ["chair", "couch", "potted plant", "bed", "toilet", "tv"];

const ROOM_LABELS: [&str; 10] = [
    "living room",
    "hall",
    "kitchen",
    "bedroom",
    "bathroom",
    "office",
    "studio",
    "pantry",
    "library",
    "laundry",
];

const DOOR_WIDTH_M: f64 = 0.9;
/// Door centers keep this far from room corners.
const DOOR_CORNER_MARGIN_M: f64 = 0.8;
/// Chance of a door on each non-tree room adjacency.
const EXTRA_DOOR_P: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct GenParams {
    pub n_rooms: usize,
    pub room_min_m: f64,
    pub room_max_m: f64,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self { n_rooms: 5, room_min_m: 3.0, room_max_m: 5.0, seed: 0 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum GenError {
    #[error("n_rooms ≥ 2 required, got {0}")]
    TooFewRooms(usize),
    #[error("room size {size_m} m below the feasible minimum {min_m} m")]
    RoomTooSmall { size_m: f64, min_m: f64 },
    #[error("room_min_m must not exceed room_max_m")]
    BadSizeRange,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, a: usize) -> usize {
        if self.0[a] != a {
            let r = self.find(self.0[a]);
            self.0[a] = r;
        }
        self.0[a]
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra] = rb;
        ra != rb
    }
}

/// Generate a connected multi-room scenario. Rooms tile a grid skeleton
/// (per-column widths, per-row heights) so neighbors share exact boundary
/// segments for doors.
pub fn generate_scenario(params: &GenParams) -> Result<Scenario, GenError> {
    if params.n_rooms < 2 {
        return Err(GenError::TooFewRooms(params.n_rooms));
    }
    if params.room_min_m > params.room_max_m {
        return Err(GenError::BadSizeRange);
    }
    // a room must admit the robot disc between inflated walls, and a door
    // must fit on the shared edge with corner margins
    let min_feasible = (8.0 * DEFAULT_ROBOT_RADIUS_M)
        .max(DOOR_WIDTH_M + 2.0 * DOOR_CORNER_MARGIN_M)
        .max(4.0 * 2.0 * DEFAULT_ROBOT_RADIUS_M);
    if params.room_min_m < min_feasible {
        return Err(GenError::RoomTooSmall { size_m: params.room_min_m, min_m: min_feasible });
    }

    let seed = params.seed;
    let n = params.n_rooms;
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);

    let mut rng = sub_rng(seed, &["worldgen", "skeleton"]);
    let col_w: Vec<f64> = (0..cols)
        .map(|_| rng.random_range(params.room_min_m..=params.room_max_m))
        .collect();
    let row_h: Vec<f64> = (0..rows)
        .map(|_| rng.random_range(params.room_min_m..=params.room_max_m))
        .collect();
    let xs: Vec<f64> = std::iter::once(0.0)
        .chain(col_w.iter().scan(0.0, |acc, w| {
            *acc += w;
            Some(*acc)
        }))
        .collect();
    let ys: Vec<f64> = std::iter::once(0.0)
        .chain(row_h.iter().scan(0.0, |acc, h| {
            *acc += h;
            Some(*acc)
        }))
        .collect();

    let cell_of = |k: usize| (k / cols, k % cols);
    let mut rooms = Vec::with_capacity(n);
    for k in 0..n {
        let (i, j) = cell_of(k);
        let label = if k < ROOM_LABELS.len() {
            ROOM_LABELS[k].to_string()
        } else {
            format!("{} {}", ROOM_LABELS[k % ROOM_LABELS.len()], k / ROOM_LABELS.len() + 1)
        };
        rooms.push(Room {
            id: k as u32,
            label,
            rect: Rect::new(xs[j], ys[i], xs[j + 1], ys[i + 1]),
        });
    }

    // adjacency edges between grid-neighbor rooms
    let mut adj: Vec<(usize, usize)> = Vec::new();
    for k in 0..n {
        let (i, j) = cell_of(k);
        if j + 1 < cols && k + 1 < n && cell_of(k + 1).0 == i {
            adj.push((k, k + 1));
        }
        if (i + 1) * cols + j < n {
            adj.push((k, (i + 1) * cols + j));
        }
    }

    let mut rng = sub_rng(seed, &["worldgen", "doors"]);
    let mut shuffled = adj.clone();
    shuffled.shuffle(&mut rng);
    let mut uf = UnionFind((0..n).collect());
    let mut door_edges: Vec<(usize, usize)> = Vec::new();
    for &(a, b) in &shuffled {
        if uf.union(a, b) {
            door_edges.push((a, b));
        }
    }
    for &(a, b) in &shuffled {
        if !door_edges.contains(&(a, b)) && rng.random_bool(EXTRA_DOOR_P) {
            door_edges.push((a, b));
        }
    }
    door_edges.sort_unstable();

    let mut doors = Vec::with_capacity(door_edges.len());
    for (idx, &(a, b)) in door_edges.iter().enumerate() {
        let (ra, rb) = (&rooms[a].rect, &rooms[b].rect);
        let position = if (ra.x1 - rb.x0).abs() < 1e-9 {
            // vertical shared boundary
            let lo = ra.y0.max(rb.y0) + DOOR_CORNER_MARGIN_M;
            let hi = ra.y1.min(rb.y1) - DOOR_CORNER_MARGIN_M;
            Point::new(ra.x1, rng.random_range(lo..=hi))
        } else {
            let lo = ra.x0.max(rb.x0) + DOOR_CORNER_MARGIN_M;
            let hi = ra.x1.min(rb.x1) - DOOR_CORNER_MARGIN_M;
            Point::new(rng.random_range(lo..=hi), ra.y1)
        };
        doors.push(Door {
            id: format!("d{idx}"),
            connects: [a as u32, b as u32],
            position,
            width_m: DOOR_WIDTH_M,
        });
    }

    // one object per room, kept clear of walls and of the start pose
    let mut rng = sub_rng(seed, &["worldgen", "objects"]);
    let mut objects = Vec::with_capacity(n);
    for (k, room) in rooms.iter().enumerate() {
        let label = OBJECT_LABELS[rng.random_range(0..OBJECT_LABELS.len())];
        let w = rng.random_range(0.6..=1.0);
        let h = rng.random_range(0.6..=1.0);
        let margin = 0.45;
        let cx_lo = room.rect.x0 + margin + w / 2.0;
        let cx_hi = room.rect.x1 - margin - w / 2.0;
        let cy_lo = room.rect.y0 + margin + h / 2.0;
        let cy_hi = room.rect.y1 - margin - h / 2.0;
        let (mut cx, mut cy) = (rng.random_range(cx_lo..=cx_hi), rng.random_range(cy_lo..=cy_hi));
        if k == 0 {
            // keep the start room's center clear for the robot
            let c = room.rect.center();
            for _ in 0..16 {
                if Point::new(cx, cy).dist(c) > 1.2 {
                    break;
                }
                cx = rng.random_range(cx_lo..=cx_hi);
                cy = rng.random_range(cy_lo..=cy_hi);
            }
        }
        objects.push(ObjectSpec {
            id: format!("{}_{}", label.replace(' ', "_"), k),
            label: label.to_string(),
            room: k as u32,
            rect: Rect::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0),
            blocking: false,
        });
    }

    let start = Pose::new(rooms[0].rect.center(), 0.0);

    // tasks: a region-constrained text goal in the farthest room, a plain
    // text goal, an image goal, and a raw position goal
    let mut rng = sub_rng(seed, &["worldgen", "tasks"]);
    let far = n - 1;
    let mid = rng.random_range(1..n);
    let tasks = vec![
        Instruction::Text {
            target_label: objects[far].label.clone(),
            region_label: Some(rooms[far].label.clone()),
        },
        Instruction::Text { target_label: objects[mid].label.clone(), region_label: None },
        Instruction::Image { embedding_seed: objects[mid].id.clone() },
        Instruction::Position { position: rooms[far].rect.center() },
    ];

    Ok(Scenario {
        name: format!("gen-{seed}-{n}"),
        cell_size_m: DEFAULT_CELL_SIZE_M,
        bounds_m: [*xs.last().unwrap(), *ys.last().unwrap()],
        rooms,
        doors,
        objects,
        dynamic_obstacles: Vec::new(),
        start,
        tasks,
    })
}
