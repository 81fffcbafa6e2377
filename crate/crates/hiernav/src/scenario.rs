//! Scenario schema: rooms, doors, objects, dynamic obstacles, tasks.
//!
//! A scenario is the ground truth for one simulated world. It loads from JSON,
//! validates its structural invariants, and round-trips byte-identically.

use crate::geometry::{Point, Pose, Rect};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Half the wall thickness rasterized along room boundaries, in meters.
/// Interior walls are shared by two rooms and come out twice this thick.
pub const WALL_HALF_M: f64 = 0.1;

pub const DEFAULT_CELL_SIZE_M: f64 = 0.1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Room {
    pub id: u32,
    pub label: String,
    pub rect: Rect,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Door {
    pub id: String,
    pub connects: [u32; 2],
    pub position: Point,
    pub width_m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: String,
    pub label: String,
    pub room: u32,
    pub rect: Rect,
    pub blocking: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DynamicObstacle {
    pub rect: Rect,
    pub spawn_after_mapping: bool,
}

/// A navigation task: text description, image stand-in, or raw position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Instruction {
    Text {
        target_label: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        region_label: Option<String>,
    },
    /// `embedding_seed` names an object id in the scenario.
    Image { embedding_seed: String },
    Position { position: Point },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default = "default_cell_size")]
    pub cell_size_m: f64,
    pub bounds_m: [f64; 2],
    pub rooms: Vec<Room>,
    pub doors: Vec<Door>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub dynamic_obstacles: Vec<DynamicObstacle>,
    pub start: Pose,
    #[serde(default)]
    pub tasks: Vec<Instruction>,
}

fn default_cell_size() -> f64 {
    DEFAULT_CELL_SIZE_M
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("validation: {0}")]
    Validation(String),
}

/// Orientation of the shared boundary two rooms meet along.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SharedBoundary {
    /// Vertical line x = `line`, overlapping for y in [lo, hi].
    Vertical { line: f64, lo: f64, hi: f64 },
    /// Horizontal line y = `line`, overlapping for x in [lo, hi].
    Horizontal { line: f64, lo: f64, hi: f64 },
}

const EPS: f64 = 1e-9;

/// Shared boundary segment of two room rectangles, if they abut edge-to-edge.
pub fn shared_boundary(a: &Rect, b: &Rect) -> Option<SharedBoundary> {
    let y_lo = a.y0.max(b.y0);
    let y_hi = a.y1.min(b.y1);
    if ((a.x1 - b.x0).abs() < EPS || (a.x0 - b.x1).abs() < EPS) && y_hi - y_lo > EPS {
        let line = if (a.x1 - b.x0).abs() < EPS { a.x1 } else { a.x0 };
        return Some(SharedBoundary::Vertical {
            line,
            lo: y_lo,
            hi: y_hi,
        });
    }
    let x_lo = a.x0.max(b.x0);
    let x_hi = a.x1.min(b.x1);
    if ((a.y1 - b.y0).abs() < EPS || (a.y0 - b.y1).abs() < EPS) && x_hi - x_lo > EPS {
        let line = if (a.y1 - b.y0).abs() < EPS { a.y1 } else { a.y0 };
        return Some(SharedBoundary::Horizontal {
            line,
            lo: x_lo,
            hi: x_hi,
        });
    }
    None
}

impl Scenario {
    pub fn room(&self, id: u32) -> Option<&Room> {
        self.rooms.iter().find(|r| r.id == id)
    }

    pub fn object(&self, id: &str) -> Option<&ObjectSpec> {
        self.objects.iter().find(|o| o.id == id)
    }

    /// Room whose rectangle contains `p`, if any (rooms are disjoint).
    pub fn room_at(&self, p: Point) -> Option<&Room> {
        self.rooms.iter().find(|r| r.rect.contains(p))
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |m: String| Err(ScenarioError::Validation(m));
        if self.rooms.is_empty() {
            return fail("no rooms".into());
        }
        if !(self.cell_size_m > 0.0) {
            return fail(format!("cell_size_m must be positive, got {}", self.cell_size_m));
        }
        let [w, h] = self.bounds_m;
        if !(w > 0.0 && h > 0.0) {
            return fail(format!("bounds_m must be positive, got [{w}, {h}]"));
        }
        let world = Rect::new(0.0, 0.0, w, h);
        for r in &self.rooms {
            if r.rect.width() <= 0.0 || r.rect.height() <= 0.0 {
                return fail(format!("room {}: degenerate rectangle", r.id));
            }
            if !world.contains_rect(&r.rect) {
                return fail(format!("room {}: rectangle outside world bounds", r.id));
            }
            if self.rooms.iter().filter(|q| q.id == r.id).count() > 1 {
                return fail(format!("room {}: duplicate id", r.id));
            }
        }
        for (i, a) in self.rooms.iter().enumerate() {
            for b in &self.rooms[i + 1..] {
                if a.rect.overlap_area(&b.rect) > EPS {
                    return fail(format!("rooms {} and {}: rectangles overlap", a.id, b.id));
                }
            }
        }
        for d in &self.doors {
            if self.doors.iter().filter(|q| q.id == d.id).count() > 1 {
                return fail(format!("door {}: duplicate id", d.id));
            }
            if !(d.width_m > 0.0) {
                return fail(format!("door {}: width must be positive", d.id));
            }
            let [ra, rb] = d.connects;
            if ra == rb {
                return fail(format!("door {}: connects a room to itself", d.id));
            }
            let (Some(a), Some(b)) = (self.room(ra), self.room(rb)) else {
                return fail(format!("door {}: connects unknown room", d.id));
            };
            let Some(sb) = shared_boundary(&a.rect, &b.rect) else {
                return fail(format!(
                    "door {}: rooms {ra} and {rb} share no boundary",
                    d.id
                ));
            };
            let (on_line, t, lo, hi) = match sb {
                SharedBoundary::Vertical { line, lo, hi } => {
                    ((d.position.x - line).abs() < EPS, d.position.y, lo, hi)
                }
                SharedBoundary::Horizontal { line, lo, hi } => {
                    ((d.position.y - line).abs() < EPS, d.position.x, lo, hi)
                }
            };
            if !on_line || t < lo - EPS || t > hi + EPS {
                return fail(format!(
                    "door {}: position not on the shared boundary of rooms {ra} and {rb}",
                    d.id
                ));
            }
            if t - d.width_m / 2.0 < lo - EPS || t + d.width_m / 2.0 > hi + EPS {
                return fail(format!(
                    "door {}: gap extends past the shared boundary of rooms {ra} and {rb}",
                    d.id
                ));
            }
        }
        for o in &self.objects {
            if self.objects.iter().filter(|q| q.id == o.id).count() > 1 {
                return fail(format!("object {}: duplicate id", o.id));
            }
            let Some(r) = self.room(o.room) else {
                return fail(format!("object {}: unknown room {}", o.id, o.room));
            };
            if !r.rect.contains_rect(&o.rect) {
                return fail(format!("object {}: rectangle outside room {}", o.id, o.room));
            }
        }
        let s = self.start.position;
        let in_free_room = self.rooms.iter().any(|r| {
            r.rect.expand(-WALL_HALF_M).contains(s)
                && !self
                    .objects
                    .iter()
                    .any(|o| o.blocking && o.rect.contains(s))
        });
        if !in_free_room {
            return fail(format!(
                "start: position [{}, {}] not in free space of any room",
                s.x, s.y
            ));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("scenario serializes");
        out.push('\n');
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path)?;
    let s: Scenario = serde_json::from_str(&text)?;
    s.validate()?;
    Ok(s)
}
