//! Batch benchmarking: run scenario suites through the agent in a parallel
//! worker pool and aggregate SR / SPL into JSON and CSV reports.

use crate::agent::{run_episode, Replans, RunConfig, ScriptedBackend, ServiceBackend};
use crate::agent::explore::ExploreMode;
use crate::agent::policy::DecisionBackend;
use crate::geometry::{Point, Rect};
use crate::metrics::{compute_sr_spl, oracle_grid, oracle_shortest, EpisodeOutcome};
use crate::scenario::{DynamicObstacle, Scenario};
use crate::seeded::sub_rng;
use crate::trace::TraceWriter;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchConfig {
    /// Episodes per task; each repeat r runs with seed base_seed + r.
    pub repeats: u32,
    pub base_seed: u64,
    pub no_global: bool,
    pub no_local: bool,
    pub explore: ExploreMode,
    /// "scripted" or a decision-service address.
    pub backend: String,
    pub step_budget: u32,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            repeats: 1,
            base_seed: 0,
            no_global: false,
            no_local: false,
            explore: ExploreMode::Oracle,
            backend: "scripted".into(),
            step_budget: crate::agent::DEFAULT_STEP_BUDGET,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub scenario: String,
    pub task: usize,
    pub seed: u64,
    pub success: bool,
    pub termination: String,
    pub path_length_m: f64,
    pub oracle_length_m: Option<f64>,
    pub spl_contrib: f64,
    pub sim_time_s: f64,
    pub replans: Replans,
    pub collisions: u32,
    /// Door-graph hop count between start and goal rooms.
    pub room_hops: Option<u32>,
    #[serde(skip)]
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Aggregates {
    pub episodes: usize,
    pub sr: f64,
    pub spl: f64,
    pub mean_sim_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub timestamp: u64,
    pub config: BenchConfig,
    pub aggregates: Aggregates,
    pub rows: Vec<EpisodeRow>,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization") + "\n"
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "scenario,task,seed,success,termination,path_length_m,oracle_length_m,\
             spl_contrib,sim_time_s,replans_local,replans_global,collisions,room_hops\n",
        );
        for r in &self.rows {
            let oracle = r.oracle_length_m.map_or(String::new(), |v| format!("{v}"));
            let hops = r.room_hops.map_or(String::new(), |v| format!("{v}"));
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.scenario,
                r.task,
                r.seed,
                r.success,
                r.termination,
                r.path_length_m,
                oracle,
                r.spl_contrib,
                r.sim_time_s,
                r.replans.local,
                r.replans.global,
                r.collisions,
                hops,
            ));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json())?;
        std::fs::write(dir.join("report.csv"), self.to_csv())
    }

    /// (SR, SPL) per room-hop bucket, rows without hops excluded.
    pub fn metrics_by_hops(&self) -> BTreeMap<u32, (f64, f64)> {
        let mut buckets: BTreeMap<u32, Vec<EpisodeOutcome>> = BTreeMap::new();
        for r in &self.rows {
            if let Some(h) = r.room_hops {
                buckets.entry(h).or_default().push(EpisodeOutcome {
                    success: r.success,
                    path_length_m: r.path_length_m,
                    oracle_length_m: r.oracle_length_m,
                });
            }
        }
        buckets.into_iter().map(|(h, eps)| (h, compute_sr_spl(&eps))).collect()
    }
}

/// Hop count between the rooms containing `from` and `to` over the door
/// graph; None when either point is outside every room or unreachable.
pub fn room_hops(s: &Scenario, from: Point, to: Point) -> Option<u32> {
    let a = s.room_at(from)?.id;
    let b = s.room_at(to)?.id;
    if a == b {
        return Some(0);
    }
    let n = s.rooms.len();
    let mut dist: Vec<Option<u32>> = vec![None; n];
    dist[a as usize] = Some(0);
    let mut frontier = std::collections::VecDeque::from([a]);
    while let Some(r) = frontier.pop_front() {
        let d = dist[r as usize].unwrap();
        for door in &s.doors {
            for (x, y) in [(door.connects[0], door.connects[1]), (door.connects[1], door.connects[0])]
            {
                if x == r && dist[y as usize].is_none() {
                    dist[y as usize] = Some(d + 1);
                    if y == b {
                        return Some(d + 1);
                    }
                    frontier.push_back(y);
                }
            }
        }
    }
    dist[b as usize]
}

const OBSTACLE_SIZE_M: f64 = 0.7;

/// Add `count` post-mapping obstacles along the straight room-graph route
/// of the scenario's first task, clear of doors and walls so a detour
/// always exists. Deterministic for a fixed seed; counts nest (the set for
/// k contains the set for k-1).
pub fn add_route_obstacles(s: &Scenario, count: usize, seed: u64) -> Scenario {
    let mut out = s.clone();
    if count == 0 {
        return out;
    }
    // route rooms from the start to the first task's goal room
    let goal_room = first_task_room(s).unwrap_or(s.rooms.len() as u32 - 1);
    let start_room = s.room_at(s.start.position).map(|r| r.id).unwrap_or(0);
    let rooms = route_rooms(s, start_room, goal_room);
    // polyline start -> door midpoints -> goal room center
    let mut line = vec![s.start.position];
    for w in rooms.windows(2) {
        if let Some(d) = s.doors.iter().find(|d| {
            (d.connects[0] == w[0] && d.connects[1] == w[1])
                || (d.connects[0] == w[1] && d.connects[1] == w[0])
        }) {
            line.push(d.position);
        }
    }
    line.push(s.rooms[goal_room as usize].rect.center());

    let mut rng = sub_rng(seed, &["bench", "obstacles"]);
    let segs = line.len() - 1;
    let mut placed = 0usize;
    let mut attempt = 0usize;
    while placed < count && attempt < count * 60 {
        let k = attempt % segs.max(1);
        attempt += 1;
        let (a, b) = (line[k], line[k + 1]);
        let t = rng.random_range(0.2..=0.8);
        let jitter = rng.random_range(-0.3..=0.3);
        let mid = Point::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t);
        let c = Point::new(mid.x + jitter, mid.y - jitter);
        let half = OBSTACLE_SIZE_M / 2.0;
        let rect = Rect::new(c.x - half, c.y - half, c.x + half, c.y + half);
        if !placement_ok(s, &out.dynamic_obstacles, rect) {
            continue;
        }
        out.dynamic_obstacles.push(DynamicObstacle { rect, spawn_after_mapping: true });
        placed += 1;
    }
    // fallback: uniform placement inside the route rooms
    let half = OBSTACLE_SIZE_M / 2.0;
    let mut attempt = 0usize;
    while placed < count && attempt < count * 200 {
        let room = &s.rooms[rooms[attempt % rooms.len()] as usize].rect;
        attempt += 1;
        let margin = half + 0.75;
        if room.width() <= 2.0 * margin || room.height() <= 2.0 * margin {
            continue;
        }
        let cx = rng.random_range(room.x0 + margin..=room.x1 - margin);
        let cy = rng.random_range(room.y0 + margin..=room.y1 - margin);
        let rect = Rect::new(cx - half, cy - half, cx + half, cy + half);
        if !placement_ok(s, &out.dynamic_obstacles, rect) {
            continue;
        }
        out.dynamic_obstacles.push(DynamicObstacle { rect, spawn_after_mapping: true });
        placed += 1;
    }
    out
}

fn first_task_room(s: &Scenario) -> Option<u32> {
    use crate::scenario::Instruction;
    match s.tasks.first()? {
        Instruction::Text { target_label, region_label } => {
            if let Some(r) = region_label {
                s.rooms.iter().find(|room| &room.label == r).map(|room| room.id)
            } else {
                s.objects.iter().find(|o| &o.label == target_label).map(|o| o.room)
            }
        }
        Instruction::Image { embedding_seed } => s.object(embedding_seed).map(|o| o.room),
        Instruction::Position { position } => s.room_at(*position).map(|r| r.id),
    }
}

fn route_rooms(s: &Scenario, from: u32, to: u32) -> Vec<u32> {
    let n = s.rooms.len();
    let mut prev: Vec<Option<u32>> = vec![None; n];
    let mut seen = vec![false; n];
    seen[from as usize] = true;
    let mut frontier = std::collections::VecDeque::from([from]);
    while let Some(r) = frontier.pop_front() {
        if r == to {
            break;
        }
        for door in &s.doors {
            for (x, y) in [(door.connects[0], door.connects[1]), (door.connects[1], door.connects[0])]
            {
                if x == r && !seen[y as usize] {
                    seen[y as usize] = true;
                    prev[y as usize] = Some(r);
                    frontier.push_back(y);
                }
            }
        }
    }
    let mut path = vec![to];
    while let Some(p) = prev[*path.last().unwrap() as usize] {
        path.push(p);
    }
    path.reverse();
    path
}

/// A candidate obstacle must sit inside one room with margin for a robot
/// detour, away from every door mouth and the start pose.
fn placement_ok(s: &Scenario, existing: &[DynamicObstacle], rect: Rect) -> bool {
    let needed = rect.expand(0.7);
    if !s.rooms.iter().any(|r| r.rect.contains_rect(&needed)) {
        return false;
    }
    let c = rect.center();
    if s.doors.iter().any(|d| d.position.dist(c) < 1.1) {
        return false;
    }
    if s.start.position.dist(c) < 1.2 {
        return false;
    }
    if s.objects.iter().any(|o| o.blocking && o.rect.expand(0.6).overlap_area(&rect) > 0.0) {
        return false;
    }
    existing.iter().all(|d| d.rect.expand(0.55).overlap_area(&rect) == 0.0)
}

fn make_backend(name: &str) -> Box<dyn DecisionBackend> {
    if name == "scripted" {
        Box::new(ScriptedBackend)
    } else {
        Box::new(ServiceBackend::new(name))
    }
}

/// Run every task of every scenario `repeats` times in a parallel worker
/// pool. Per-episode failures are recorded as rows, never raised.
pub fn run_bench(scenarios: &[Scenario], cfg: &BenchConfig) -> BenchReport {
    let oracle_grids: Vec<_> = scenarios.par_iter().map(oracle_grid).collect();
    let mut items: Vec<(usize, usize, u32)> = Vec::new();
    for (si, s) in scenarios.iter().enumerate() {
        for ti in 0..s.tasks.len() {
            for rep in 0..cfg.repeats {
                items.push((si, ti, rep));
            }
        }
    }

    let mut rows: Vec<EpisodeRow> = items
        .par_iter()
        .map(|&(si, ti, rep)| {
            let s = &scenarios[si];
            let seed = cfg.base_seed + rep as u64;
            let run_cfg = RunConfig {
                seed,
                explore: cfg.explore,
                no_global: cfg.no_global,
                no_local: cfg.no_local,
                step_budget: cfg.step_budget,
                ..RunConfig::default()
            };
            let mut backend = make_backend(&cfg.backend);
            let mut trace = TraceWriter::null();
            let t0 = Instant::now();
            let res = run_episode(s, ti, &run_cfg, backend.as_mut(), &mut trace);
            let wall_ms = t0.elapsed().as_millis() as u64;
            match res {
                Ok(r) => {
                    let oracle = r.p_end.and_then(|p| {
                        oracle_shortest(&oracle_grids[si], s.start.position, p).ok()
                    });
                    let outcome = EpisodeOutcome {
                        success: r.success,
                        path_length_m: r.path_length_m,
                        oracle_length_m: oracle,
                    };
                    EpisodeRow {
                        scenario: s.name.clone(),
                        task: ti,
                        seed,
                        success: r.success,
                        termination: r.termination.code().to_string(),
                        path_length_m: r.path_length_m,
                        oracle_length_m: oracle,
                        spl_contrib: outcome.spl_contrib(),
                        sim_time_s: r.sim_time_s,
                        replans: r.replans,
                        collisions: r.collisions,
                        room_hops: r.p_end.and_then(|p| room_hops(s, s.start.position, p)),
                        wall_ms,
                    }
                }
                Err(e) => EpisodeRow {
                    scenario: s.name.clone(),
                    task: ti,
                    seed,
                    success: false,
                    termination: format!("SetupError: {e}"),
                    path_length_m: 0.0,
                    oracle_length_m: None,
                    spl_contrib: 0.0,
                    sim_time_s: 0.0,
                    replans: Replans::default(),
                    collisions: 0,
                    room_hops: None,
                    wall_ms,
                },
            }
        })
        .collect();

    rows.sort_by(|a, b| {
        a.scenario.cmp(&b.scenario).then(a.task.cmp(&b.task)).then(a.seed.cmp(&b.seed))
    });
    let outcomes: Vec<EpisodeOutcome> = rows
        .iter()
        .map(|r| EpisodeOutcome {
            success: r.success,
            path_length_m: r.path_length_m,
            oracle_length_m: r.oracle_length_m,
        })
        .collect();
    let (sr, spl) = compute_sr_spl(&outcomes);
    let mean_sim_time_s = rows.iter().map(|r| r.sim_time_s).sum::<f64>() / rows.len().max(1) as f64;
    BenchReport {
        timestamp: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        config: cfg.clone(),
        aggregates: Aggregates { episodes: rows.len(), sr, spl, mean_sim_time_s },
        rows,
    }
}

/// Report bytes with the timestamp line blanked, for determinism checks.
pub fn json_without_timestamp(report_json: &str) -> String {
    report_json
        .lines()
        .filter(|l| !l.trim_start().starts_with("\"timestamp\""))
        .collect::<Vec<_>>()
        .join("\n")
}
