//! The navigation agent: context assembly, action selection through a
//! pluggable decision backend, exploration, hierarchical planning, segment
//! execution with conflict monitoring, and replan escalation.

pub mod backend;
pub mod explore;
pub mod policy;

pub(crate) mod executor;

use crate::field::SemanticField;
use crate::geometry::{Point, Rect};
use crate::grid::{rasterize, CellState, OccupancyGrid};
use crate::planner::global::{
    plan_global, resolve_goal, sample_free_points, snap_goal, GlobalError, SamplePointSet,
};
use crate::planner::local::{
    build_local_costmap, detect_conflict, plan_local, plan_toward, project_waypoint, LocalParams,
};
use crate::robot::RobotState;
use crate::scenario::{Instruction, Scenario, ScenarioError};
use crate::sensor::{simulate_depth, ScanParams};
use crate::topo::{build_topo_graph, segment_regions, RegionLabeling, TopoGraph};
use crate::trace::TraceWriter;
use executor::{drive_route, goto, DriveStop};
use explore::{explore, ExploreMode};
use policy::{scripted_action, Action, BackendDecision, DecisionBackend};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub use backend::{decode_action, encode_context, ServiceBackend};
pub use explore::{ExploreError, ExploreReport};
pub use policy::{BackendDecision as Decision, ScriptedBackend};

pub const DEFAULT_SUCCESS_RADIUS_M: f64 = 1.0;
pub const DEFAULT_STEP_BUDGET: u32 = 20_000;
pub const DEFAULT_SEGMENT_TIMEOUT_S: f64 = 60.0;
pub const DEFAULT_VISIT_LIMIT: u32 = 3;
pub const DEFAULT_MAX_GLOBAL_REPLANS: u32 = 3;

/// Fixed background blurb handed to decision backends as context key "B".
pub const BACKGROUND: &str = "You operate a wheeled robot in a two-dimensional \
multi-room floor plan. Choose the next workflow action from the allowed set \
using the map, the instruction, plan history, recent trajectory, and status.";

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TimedPose {
    pub t_s: f64,
    pub position: Point,
    pub yaw_rad: f64,
}

/// Map handle shared with backends: topometric graph JSON plus the
/// semantic field's known labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapHandle {
    pub graph: serde_json::Value,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanSummary {
    pub kind: String,
    pub segment: Option<usize>,
    pub waypoints: usize,
    pub cost_m: f64,
}

/// Status block "S": everything the scripted policy needs, so an external
/// service seeing only the request JSON can reproduce it exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentStatus {
    pub position: Point,
    pub has_memory: bool,
    pub has_graph: bool,
    pub plan_valid: bool,
    pub segment_index: usize,
    pub n_segments: usize,
    pub need_local_plan: bool,
    pub plan_complete: bool,
    pub within_success_radius: bool,
    pub conflict_cells: usize,
    pub local_blocked: bool,
    pub visit_trigger: bool,
    pub segment_elapsed_s: f64,
    pub max_visit_count: u32,
    pub visit_counts: BTreeMap<u32, u32>,
    pub replans_local: u32,
    pub replans_global: u32,
    pub max_global_replans: u32,
    pub segment_timeout_s: f64,
}

impl Default for AgentStatus {
    fn default() -> Self {
        Self {
            position: Point::new(0.0, 0.0),
            has_memory: false,
            has_graph: false,
            plan_valid: false,
            segment_index: 0,
            n_segments: 0,
            need_local_plan: false,
            plan_complete: false,
            within_success_radius: false,
            conflict_cells: 0,
            local_blocked: false,
            visit_trigger: false,
            segment_elapsed_s: 0.0,
            max_visit_count: 0,
            visit_counts: BTreeMap::new(),
            replans_local: 0,
            replans_global: 0,
            max_global_replans: DEFAULT_MAX_GLOBAL_REPLANS,
            segment_timeout_s: DEFAULT_SEGMENT_TIMEOUT_S,
        }
    }
}

/// The contextual record behind every decision.
#[derive(Debug, Clone, Serialize)]
pub struct AgentContext {
    pub background: String,
    pub instruction: Instruction,
    pub map: Option<MapHandle>,
    pub plan_history: Vec<PlanSummary>,
    pub trajectory: Vec<TimedPose>,
    pub status: AgentStatus,
    pub allowed_actions: Vec<String>,
    pub last_action: Option<Action>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Arrived,
    ErrorReport,
    Timeout,
    Unreachable,
    NotFound,
}

impl Termination {
    pub fn code(self) -> &'static str {
        match self {
            Termination::Arrived => "Arrived",
            Termination::ErrorReport => "ErrorReport",
            Termination::Timeout => "Timeout",
            Termination::Unreachable => "Unreachable",
            Termination::NotFound => "NotFound",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Replans {
    pub local: u32,
    pub global: u32,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpisodeResult {
    pub success: bool,
    pub termination: Termination,
    pub path_length_m: f64,
    pub sim_time_s: f64,
    pub replans: Replans,
    pub collisions: u32,
    /// Resolved goal position, when goal resolution got that far.
    pub p_end: Option<Point>,
    /// Segment targets of the last installed global plan, goal included.
    pub global_segments: Vec<Point>,
    pub trajectory: Vec<TimedPose>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub explore: ExploreMode,
    pub no_global: bool,
    pub no_local: bool,
    pub step_budget: u32,
    pub success_radius_m: f64,
    pub segment_timeout_s: f64,
    pub max_global_replans: u32,
    pub visit_limit: u32,
    pub sample_density: f64,
    pub embed_dim: usize,
    pub local: LocalParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            explore: ExploreMode::Oracle,
            no_global: false,
            no_local: false,
            step_budget: DEFAULT_STEP_BUDGET,
            success_radius_m: DEFAULT_SUCCESS_RADIUS_M,
            segment_timeout_s: DEFAULT_SEGMENT_TIMEOUT_S,
            max_global_replans: DEFAULT_MAX_GLOBAL_REPLANS,
            visit_limit: DEFAULT_VISIT_LIMIT,
            sample_density: crate::planner::global::DEFAULT_SAMPLE_DENSITY,
            embed_dim: crate::field::DEFAULT_EMBED_DIM,
            local: LocalParams::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EpisodeSetupError {
    #[error("task index {index} out of range: scenario has {count} tasks")]
    TaskIndex { index: usize, count: usize },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// Ground-truth world simulation for one episode: the live occupancy grid
/// (dynamic obstacles included as they appear), the robot, and counters.
pub(crate) struct Sim<'s> {
    pub scenario: &'s Scenario,
    pub active: OccupancyGrid,
    pending: Vec<Rect>,
    pub spawning_enabled: bool,
    pub robot: RobotState,
    pub steps: u32,
    pub step_budget: u32,
    pub path_length_m: f64,
    pub trajectory: Vec<TimedPose>,
    pub collisions: u32,
}

/// Margin around a pending obstacle that must be clear of the robot
/// before it may appear.
const SPAWN_CLEARANCE_M: f64 = 0.4;

impl<'s> Sim<'s> {
    pub fn new(scenario: &'s Scenario, step_budget: u32) -> Self {
        let mut active = rasterize(scenario, false);
        let mut pending = Vec::new();
        for d in &scenario.dynamic_obstacles {
            if d.spawn_after_mapping {
                pending.push(d.rect);
            } else {
                active.paint_rect(d.rect, CellState::Occupied);
            }
        }
        let robot = RobotState::at(scenario.start);
        let trajectory = vec![TimedPose {
            t_s: 0.0,
            position: robot.position(),
            yaw_rad: robot.pose.yaw_rad,
        }];
        Self {
            scenario,
            active,
            pending,
            spawning_enabled: false,
            robot,
            steps: 0,
            step_budget,
            path_length_m: 0.0,
            trajectory,
            collisions: 0,
        }
    }

    pub fn budget_left(&self) -> bool {
        self.steps < self.step_budget
    }

    fn try_spawn(&mut self, trace: &mut TraceWriter) {
        if !self.spawning_enabled || self.pending.is_empty() {
            return;
        }
        let pos = self.robot.position();
        let mut spawned = Vec::new();
        self.pending.retain(|&rect| {
            if rect.expand(SPAWN_CLEARANCE_M).contains(pos) {
                true
            } else {
                spawned.push(rect);
                false
            }
        });
        for rect in spawned {
            self.active.paint_rect(rect, CellState::Occupied);
            trace.obstacle_spawn(self.robot.sim_time_s, rect);
        }
    }

    /// Advance one control period. Returns true when the commanded
    /// translation was blocked by contact.
    pub fn tick(&mut self, cmd: crate::robot::Command, trace: &mut TraceWriter) -> bool {
        self.try_spawn(trace);
        let before = self.robot.position();
        let (next, collided) = crate::robot::step_robot(
            &self.robot,
            cmd,
            crate::robot::SIM_DT_S,
            &self.active,
        );
        self.path_length_m += before.dist(next.position());
        self.robot = next;
        self.steps += 1;
        trace.pose(self.robot.sim_time_s, self.robot.pose);
        self.trajectory.push(TimedPose {
            t_s: self.robot.sim_time_s,
            position: self.robot.position(),
            yaw_rad: self.robot.pose.yaw_rad,
        });
        if collided {
            self.collisions += 1;
            trace.collision(self.robot.sim_time_s);
        }
        collided
    }
}

struct Episode<'s, 'c> {
    sim: Sim<'s>,
    cfg: &'c RunConfig,
    instruction: Instruction,
    memory: Option<OccupancyGrid>,
    labeling: Option<RegionLabeling>,
    field: Option<SemanticField>,
    samples: Option<SamplePointSet>,
    graph: Option<TopoGraph>,
    map_handle: Option<MapHandle>,
    built: bool,
    p_end: Option<Point>,
    segments: Vec<Point>,
    segment_entrances: Vec<Option<u32>>,
    segment_index: usize,
    segment_started_s: f64,
    route: Vec<Point>,
    plan_valid: bool,
    need_local_plan: bool,
    plan_complete: bool,
    local_blocked: bool,
    visit_trigger: bool,
    pending_conflicts: Vec<(usize, usize)>,
    visit_counts: BTreeMap<u32, u32>,
    replans_local: u32,
    replans_global: u32,
    wiggles: u32,
    plan_history: Vec<PlanSummary>,
    last_action: Option<Action>,
    progress_anchor: Option<Point>,
}

/// Movement below this between consecutive local plans of one segment
/// counts as no progress and escalates.
const PROGRESS_EPS_M: f64 = 0.05;

/// Horizon side length for graph-free receding steps; wide enough to keep
/// a room's doors inside the window from anywhere in the room.
const NO_GLOBAL_WINDOW_M: f64 = 8.0;
/// Entrances this close to a stuck robot are the ones penalized first.
const PENALTY_RADIUS_M: f64 = 2.5;

impl<'s, 'c> Episode<'s, 'c> {
    fn new(scenario: &'s Scenario, instruction: Instruction, cfg: &'c RunConfig) -> Self {
        Self {
            sim: Sim::new(scenario, cfg.step_budget),
            cfg,
            instruction,
            memory: None,
            labeling: None,
            field: None,
            samples: None,
            graph: None,
            map_handle: None,
            built: false,
            p_end: None,
            segments: Vec::new(),
            segment_entrances: Vec::new(),
            segment_index: 0,
            segment_started_s: 0.0,
            route: Vec::new(),
            plan_valid: false,
            need_local_plan: false,
            plan_complete: false,
            local_blocked: false,
            visit_trigger: false,
            pending_conflicts: Vec::new(),
            visit_counts: BTreeMap::new(),
            replans_local: 0,
            replans_global: 0,
            wiggles: 0,
            plan_history: Vec::new(),
            last_action: None,
            progress_anchor: None,
        }
    }

    fn status(&self) -> AgentStatus {
        let position = self.sim.robot.position();
        let within = self
            .p_end
            .is_some_and(|p| p.dist(position) <= self.cfg.success_radius_m);
        AgentStatus {
            position,
            has_memory: self.memory.is_some(),
            has_graph: self.built,
            plan_valid: self.plan_valid,
            segment_index: self.segment_index,
            n_segments: self.segments.len(),
            need_local_plan: self.need_local_plan,
            plan_complete: self.plan_complete,
            within_success_radius: within,
            conflict_cells: self.pending_conflicts.len(),
            local_blocked: self.local_blocked,
            visit_trigger: self.visit_trigger,
            segment_elapsed_s: if self.plan_valid {
                self.sim.robot.sim_time_s - self.segment_started_s
            } else {
                0.0
            },
            max_visit_count: self.visit_counts.values().copied().max().unwrap_or(0),
            visit_counts: self.visit_counts.clone(),
            replans_local: self.replans_local,
            replans_global: self.replans_global,
            max_global_replans: self.cfg.max_global_replans,
            segment_timeout_s: self.cfg.segment_timeout_s,
        }
    }

    fn context(&self) -> AgentContext {
        let tail = self.sim.trajectory.len().saturating_sub(50);
        AgentContext {
            background: BACKGROUND.to_string(),
            instruction: self.instruction.clone(),
            map: self.map_handle.clone(),
            plan_history: self.plan_history.clone(),
            trajectory: self.sim.trajectory[tail..].to_vec(),
            status: self.status(),
            allowed_actions: Action::ALL.iter().map(|a| a.name().to_string()).collect(),
            last_action: self.last_action,
        }
    }

    /// Goal resolution, done once per episode.
    fn resolve_end(&mut self) -> Result<Point, Termination> {
        if let Some(p) = self.p_end {
            return Ok(p);
        }
        let (field, samples, labeling, memory) = (
            self.field.as_ref().unwrap(),
            self.samples.as_ref().unwrap(),
            self.labeling.as_ref().unwrap(),
            self.memory.as_ref().unwrap(),
        );
        let constraint: Option<Vec<u32>> = match &self.instruction {
            Instruction::Text { region_label: Some(r), .. } => {
                Some(labeling.region_by_label(r))
            }
            _ => None,
        };
        let resolved =
            resolve_goal(&self.instruction, field, samples, labeling, constraint.as_deref())
                .map_err(|e| match e {
                    GlobalError::TargetNotFound { .. }
                    | GlobalError::ConstraintEmpty
                    | GlobalError::NoSamples
                    | GlobalError::Field(_) => Termination::NotFound,
                    _ => Termination::Unreachable,
                })?;
        let snapped = snap_goal(memory, resolved).ok_or(Termination::Unreachable)?;
        self.p_end = Some(snapped);
        Ok(snapped)
    }

    fn install_plan(
        &mut self,
        waypoints: Vec<Point>,
        entrance_ids: Vec<u32>,
        p_end: Point,
    ) {
        self.segments = waypoints;
        self.segments.push(p_end);
        self.segment_entrances = entrance_ids.into_iter().map(Some).collect();
        self.segment_entrances.push(None);
        self.segment_index = 0;
        self.segment_started_s = self.sim.robot.sim_time_s;
        self.plan_valid = true;
        self.plan_complete = false;
        self.need_local_plan = true;
        self.route.clear();
        self.progress_anchor = None;
        self.wiggles = 0;
    }

    fn global_plan(&mut self, trace: &mut TraceWriter) -> Option<Termination> {
        let p_end = match self.resolve_end() {
            Ok(p) => p,
            Err(t) => return Some(t),
        };
        if self.cfg.no_global {
            self.install_plan(Vec::new(), Vec::new(), p_end);
            return None;
        }
        let (graph, labeling) = (self.graph.as_ref().unwrap(), self.labeling.as_ref().unwrap());
        match plan_global(graph, labeling, self.sim.robot.position(), p_end) {
            Ok(plan) => {
                trace.global_plan(&plan.waypoints, plan.total_cost_m);
                self.plan_history.push(PlanSummary {
                    kind: "global".into(),
                    segment: None,
                    waypoints: plan.waypoints.len(),
                    cost_m: plan.total_cost_m,
                });
                self.install_plan(plan.waypoints, plan.entrance_ids, p_end);
                None
            }
            Err(_) => Some(Termination::Unreachable),
        }
    }

    /// Plan the current segment's local route. Returns false when blocked.
    fn local_plan(&mut self, trace: &mut TraceWriter) -> bool {
        let target = self.segments[self.segment_index];
        let pose = self.sim.robot.pose;
        if self.cfg.no_local {
            self.route = vec![target];
            self.need_local_plan = false;
            self.progress_anchor = Some(pose.position);
            return true;
        }
        let memory = self.memory.as_ref().unwrap();
        let scans = match simulate_depth(&self.sim.active, pose, ScanParams::default()) {
            Ok(s) => vec![s],
            Err(_) => Vec::new(),
        };
        // without a graph the segment target can be arbitrarily far, so the
        // window step widens its horizon and seeks the reachable cell nearest
        // the goal instead of projecting along a bearing that may dead-end
        let attempt = if self.cfg.no_global {
            let wide = LocalParams {
                window_m: self.cfg.local.window_m.max(NO_GLOBAL_WINDOW_M),
                ..self.cfg.local
            };
            let cm = build_local_costmap(&scans, memory, pose, &wide);
            plan_toward(&cm, target, &wide)
        } else {
            let cm = build_local_costmap(&scans, memory, pose, &self.cfg.local);
            let projected = project_waypoint(target, pose, &self.cfg.local);
            plan_local(&cm, projected, &self.cfg.local)
        };
        match attempt {
            Ok(lp) => {
                trace.local_plan(self.segment_index, &lp.waypoints);
                self.plan_history.push(PlanSummary {
                    kind: "local".into(),
                    segment: Some(self.segment_index),
                    waypoints: lp.waypoints.len(),
                    cost_m: lp.length_m,
                });
                self.route = lp.polyline;
                self.need_local_plan = false;
                self.progress_anchor = Some(pose.position);
                true
            }
            Err(_) => {
                trace.local_blocked(self.segment_index);
                self.local_blocked = true;
                false
            }
        }
    }

    fn sense_conflicts(&self, lookahead_m: f64) -> Vec<(usize, usize)> {
        let Some(memory) = self.memory.as_ref() else {
            return Vec::new();
        };
        match simulate_depth(&self.sim.active, self.sim.robot.pose, ScanParams::default()) {
            Ok(scan) => detect_conflict(&scan, memory, self.sim.robot.pose, lookahead_m),
            Err(_) => Vec::new(),
        }
    }

    fn arrival(&mut self, trace: &mut TraceWriter) {
        let target = self.segments[self.segment_index];
        let d = self.sim.robot.position().dist(target);
        let last = self.segment_index + 1 == self.segments.len();
        if d <= self.cfg.local.arrival_m {
            if last {
                self.plan_complete = true;
                self.need_local_plan = false;
                return;
            }
            if let Some(ent) = self.segment_entrances[self.segment_index] {
                let count = self.visit_counts.entry(ent).or_insert(0);
                *count += 1;
                if *count >= self.cfg.visit_limit {
                    trace.visit_limit(ent, *count);
                    self.visit_trigger = true;
                }
            }
            self.segment_index += 1;
            self.segment_started_s = self.sim.robot.sim_time_s;
            self.need_local_plan = true;
            self.progress_anchor = None;
            self.wiggles = 0;
            return;
        }
        // route exhausted short of the target: receding horizon, with a
        // stall check so a pinned robot escalates instead of spinning
        let moved = self
            .progress_anchor
            .map_or(f64::INFINITY, |a| self.sim.robot.position().dist(a));
        if moved < PROGRESS_EPS_M {
            trace.local_blocked(self.segment_index);
            self.local_blocked = true;
        } else {
            // a progressing leg restarts the segment clock: the timeout
            // detects being stuck, not long multi-leg tours
            self.need_local_plan = true;
            self.segment_started_s = self.sim.robot.sim_time_s;
        }
    }

    fn execute(&mut self, trace: &mut TraceWriter) -> Option<Termination> {
        let deadline = self.segment_started_s + self.cfg.segment_timeout_s;
        let route = std::mem::take(&mut self.route);
        let memory = if self.cfg.no_local { None } else { self.memory.as_ref() };
        // an intermediate segment end is a door handoff: reaching it within
        // the arrival radius is enough, and stopping early avoids a dog-leg
        // through the exact door center. The goal segment still lands exactly,
        // as do receding legs, whose progress argument needs the endpoint.
        // Strictly inside the arrival radius, so a landing always advances
        // the segment instead of leaving a stall-length crawl.
        let last_segment = self.segment_index + 1 == self.segments.len();
        let final_tol =
            if last_segment { executor::LAND_TOL_M } else { 0.8 * self.cfg.local.arrival_m };
        let outcome = drive_route(
            &mut self.sim,
            trace,
            &route,
            memory,
            deadline,
            self.cfg.local.lookahead_m,
            final_tol,
        );
        match outcome {
            DriveStop::Done => {
                self.arrival(trace);
                None
            }
            DriveStop::Conflict(cells) => {
                trace.conflict(cells.len());
                self.pending_conflicts = cells;
                None
            }
            DriveStop::Timeout => {
                trace.segment_timeout(
                    self.segment_index,
                    self.sim.robot.sim_time_s - self.segment_started_s,
                );
                None
            }
            DriveStop::Budget => Some(Termination::Timeout),
            DriveStop::Collided => {
                if self.cfg.no_local {
                    self.wiggle(trace);
                    return None;
                }
                let cells = self.sense_conflicts(1.0);
                if cells.is_empty() {
                    trace.local_blocked(self.segment_index);
                    self.local_blocked = true;
                } else {
                    trace.conflict(cells.len());
                    self.pending_conflicts = cells;
                }
                None
            }
        }
    }

    /// Contact recovery without a local planner: sidestep deterministically
    /// and try the straight line again. The sidestep direction fans out to
    /// alternating sides of the chord bearing at widening angles, enough to
    /// thread a grazed door jamb but not to detour around a real obstacle.
    fn wiggle(&mut self, trace: &mut TraceWriter) {
        self.wiggles += 1;
        if self.wiggles > 12 {
            trace.local_blocked(self.segment_index);
            self.local_blocked = true;
            return;
        }
        let target = self.segments[self.segment_index];
        let p = self.sim.robot.position();
        let bearing = (target.y - p.y).atan2(target.x - p.x);
        let widening = f64::from((self.wiggles + 1) / 2);
        let side = if self.wiggles % 2 == 1 { 1.0 } else { -1.0 };
        let yaw = bearing + side * 0.7 * widening;
        let _ = executor::rotate_to(&mut self.sim, trace, yaw);
        let side_pt = self.sim.robot.position().polar(yaw, 0.3);
        let _ = goto(&mut self.sim, trace, side_pt, 0.05, 60);
        self.need_local_plan = true;
        // wiggling spends sim time outside the drive loop's deadline check;
        // record the clock crossing here or the escalation ledger would show
        // a global replan with no trigger
        let elapsed = self.sim.robot.sim_time_s - self.segment_started_s;
        if elapsed > self.cfg.segment_timeout_s {
            trace.segment_timeout(self.segment_index, elapsed);
        }
    }

    fn replan_local(&mut self, trace: &mut TraceWriter) {
        trace.replan_local(self.segment_index);
        self.replans_local += 1;
        let memory = self.memory.as_mut().unwrap();
        for &(ix, iy) in &self.pending_conflicts {
            memory.set(ix, iy, CellState::Occupied);
        }
        self.pending_conflicts.clear();
        self.local_plan(trace);
    }

    fn replan_global(&mut self, trace: &mut TraceWriter) -> Option<Termination> {
        if self.cfg.no_global {
            return Some(Termination::ErrorReport);
        }
        let robot = self.sim.robot.position();
        let graph = self.graph.as_ref().unwrap();
        let mut nearest: Option<(f64, u32)> = None;
        for id in graph.entrance_ids() {
            if let Some(p) = graph.entrance_position(id) {
                let d = p.dist(robot);
                if d <= PENALTY_RADIUS_M && nearest.map_or(true, |(bd, _)| d < bd) {
                    nearest = Some((d, id));
                }
            }
        }
        let penalty = nearest.map(|(_, id)| id).or_else(|| {
            self.segment_entrances.get(self.segment_index).copied().flatten()
        });
        trace.replan_global(penalty);
        self.replans_global += 1;
        if let Some(id) = penalty {
            let g = crate::planner::global::penalize_edge(self.graph.as_ref().unwrap(), id);
            if let Some(mh) = self.map_handle.as_mut() {
                mh.graph = serde_json::from_str(&crate::topo::serialize_graph(&g))
                    .unwrap_or(serde_json::Value::Null);
            }
            self.graph = Some(g);
        }
        self.local_blocked = false;
        self.visit_trigger = false;
        self.pending_conflicts.clear();
        self.segment_started_s = self.sim.robot.sim_time_s;
        self.global_plan(trace)
    }

    fn build_map(&mut self) {
        let memory = self.memory.as_ref().unwrap();
        let labeling = segment_regions(memory, &self.sim.scenario.doors, &self.sim.scenario.rooms);
        let field = SemanticField::from_scenario(self.sim.scenario, self.cfg.embed_dim, self.cfg.seed);
        let samples = sample_free_points(memory, self.cfg.sample_density, self.cfg.seed)
            .unwrap_or(SamplePointSet {
                points: Vec::new(),
                density: self.cfg.sample_density,
                seed: self.cfg.seed,
            });
        let graph_value = if self.cfg.no_global {
            serde_json::Value::Null
        } else {
            let graph = build_topo_graph(&labeling, &self.sim.scenario.doors);
            let v = serde_json::from_str(&crate::topo::serialize_graph(&graph))
                .unwrap_or(serde_json::Value::Null);
            self.graph = Some(graph);
            v
        };
        self.map_handle = Some(MapHandle { graph: graph_value, labels: field.labels() });
        self.labeling = Some(labeling);
        self.field = Some(field);
        self.samples = Some(samples);
        self.built = true;
    }

    /// One action's effect. `Some` terminates the episode.
    fn apply(&mut self, action: Action, trace: &mut TraceWriter) -> Option<Termination> {
        match action {
            Action::ExploreStep => {
                if self.memory.is_some() {
                    return Some(Termination::ErrorReport);
                }
                match explore(&mut self.sim, trace, self.cfg.explore) {
                    Ok(rep) => {
                        self.memory = Some(rep.memory);
                        self.sim.spawning_enabled = true;
                        None
                    }
                    Err(_) => Some(Termination::ErrorReport),
                }
            }
            Action::BuildMap => {
                if self.memory.is_none() || self.built {
                    return Some(Termination::ErrorReport);
                }
                self.build_map();
                None
            }
            Action::PlanGlobal => {
                if !self.built || self.plan_valid {
                    return Some(Termination::ErrorReport);
                }
                self.global_plan(trace)
            }
            Action::PlanLocal => {
                if !self.plan_valid || !self.need_local_plan {
                    return Some(Termination::ErrorReport);
                }
                self.local_plan(trace);
                None
            }
            Action::ExecuteStep => {
                if !self.plan_valid || self.route.is_empty() {
                    return Some(Termination::ErrorReport);
                }
                self.execute(trace)
            }
            Action::ReplanLocal => {
                if self.pending_conflicts.is_empty() {
                    return Some(Termination::ErrorReport);
                }
                self.replan_local(trace);
                None
            }
            Action::ReplanGlobal => self.replan_global(trace),
            Action::ReportError => Some(Termination::ErrorReport),
            Action::Stop => Some(Termination::Arrived),
        }
    }
}

/// Run one task of a scenario to termination.
pub fn run_episode(
    scenario: &Scenario,
    task_index: usize,
    cfg: &RunConfig,
    backend: &mut dyn DecisionBackend,
    trace: &mut TraceWriter,
) -> Result<EpisodeResult, EpisodeSetupError> {
    scenario.validate()?;
    let instruction = scenario
        .tasks
        .get(task_index)
        .cloned()
        .ok_or(EpisodeSetupError::TaskIndex { index: task_index, count: scenario.tasks.len() })?;

    let mut ep = Episode::new(scenario, instruction, cfg);
    let mut decisions = 0u32;
    let termination = loop {
        decisions += 1;
        if decisions > 500_000 || !ep.sim.budget_left() {
            break Termination::Timeout;
        }
        let ctx = ep.context();
        let action = match backend.decide(&ctx) {
            BackendDecision::Action(a) => a,
            BackendDecision::Fallback(reason) => {
                trace.backend_fallback(&reason);
                scripted_action(&ctx.status)
            }
        };
        ep.last_action = Some(action);
        if let Some(t) = ep.apply(action, trace) {
            break t;
        }
    };

    let success = termination == Termination::Arrived;
    trace.terminate(termination.code(), success);
    Ok(EpisodeResult {
        success,
        termination,
        path_length_m: ep.sim.path_length_m,
        sim_time_s: ep.sim.robot.sim_time_s,
        replans: Replans { local: ep.replans_local, global: ep.replans_global },
        collisions: ep.sim.collisions,
        p_end: ep.p_end,
        global_segments: ep.segments,
        trajectory: ep.sim.trajectory,
    })
}
