//! Hierarchical layout-aware navigation for desk-scale multi-room worlds:
//! a deterministic 2D simulator, a synthetic semantic embedding field, a
//! topometric room graph, global and local planners, and an agent loop
//! with optional external decision services, plus benchmarking over
//! generated scenario suites.

pub mod agent;
pub mod bench;
pub mod cli;
pub mod field;
pub mod geometry;
pub mod grid;
pub mod metrics;
pub mod pathfind;
pub mod planner;
pub mod robot;
pub mod scenario;
pub mod seeded;
pub mod sensor;
pub mod svg;
pub mod topo;
pub mod trace;
pub mod worldgen;

pub use agent::{
    run_episode, AgentContext, AgentStatus, EpisodeResult, RunConfig, ServiceBackend,
    Termination,
};
pub use agent::explore::{map_scenario, ExploreMode};
pub use bench::{run_bench, BenchConfig, BenchReport};
pub use agent::policy::{scripted_action, Action, DecisionBackend, ScriptedBackend};
pub use field::{combined_similarity, cosine, Embedding, QueryEmbedding, SemanticField};
pub use geometry::{Point, Pose, Rect};
pub use grid::{rasterize, CellState, OccupancyGrid};
pub use metrics::{compute_sr_spl, oracle_grid, oracle_shortest, EpisodeOutcome};
pub use planner::global::{plan_global, resolve_goal, sample_free_points, GlobalPlan};
pub use planner::local::{
    build_local_costmap, detect_conflict, plan_local, plan_toward, LocalCostmap,
};
pub use robot::{step_robot, Command, RobotState};
pub use scenario::{load_scenario, Instruction, Scenario};
pub use sensor::{simulate_depth, DepthScan, ScanParams};
pub use topo::{build_topo_graph, segment_regions, RegionLabeling, TopoGraph};
pub use trace::TraceWriter;
pub use worldgen::{generate_scenario, GenParams};
