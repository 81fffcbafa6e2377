//! Plan hierarchically: a global route over the topometric graph, then an
//! ego-centric local plan toward the first route segment.

use hiernav::field::SemanticField;
use hiernav::grid::rasterize;
use hiernav::planner::global::{plan_global, resolve_goal, sample_free_points, snap_goal};
use hiernav::planner::local::{build_local_costmap, plan_local, project_waypoint, LocalParams};
use hiernav::scenario::load_scenario;
use hiernav::sensor::{simulate_depth, ScanParams};
use hiernav::topo::{build_topo_graph, segment_regions};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/fixture3r.json");
    let scenario = load_scenario(path).unwrap();
    let grid = rasterize(&scenario, false);
    let labeling = segment_regions(&grid, &scenario.doors, &scenario.rooms);
    let graph = build_topo_graph(&labeling, &scenario.doors);
    let field = SemanticField::from_scenario(&scenario, 64, 0);
    let samples = sample_free_points(&grid, 4.0, 0).unwrap();

    let instr = &scenario.tasks[0];
    let constraint = labeling.region_by_label("kitchen");
    let p_end = resolve_goal(instr, &field, &samples, &labeling, Some(&constraint)).unwrap();
    let p_end = snap_goal(&grid, p_end).unwrap();
    println!("goal resolved to ({:.2}, {:.2})", p_end.x, p_end.y);

    let start = scenario.start.position;
    let plan = plan_global(&graph, &labeling, start, p_end).unwrap();
    println!("global route, {:.2} m over {} entrances:", plan.total_cost_m, plan.waypoints.len());
    for (w, id) in plan.waypoints.iter().zip(&plan.entrance_ids) {
        println!("  entrance vertex {:2} at ({:.2}, {:.2})", id, w.x, w.y);
    }

    let params = LocalParams::default();
    let scan = simulate_depth(&grid, scenario.start, ScanParams::default()).unwrap();
    let cm = build_local_costmap(&[scan], &grid, scenario.start, &params);
    let target = project_waypoint(plan.waypoints[0], scenario.start, &params);
    let local = plan_local(&cm, target, &params).unwrap();
    println!(
        "local plan toward the first entrance: {} waypoints, {:.2} m",
        local.waypoints.len(),
        local.length_m
    );
    for w in &local.waypoints {
        println!("  ({:.2}, {:.2})", w.x, w.y);
    }
}
