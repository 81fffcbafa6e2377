//! Global planning: free-space sampling, similarity argmax goal resolution,
//! and least-cost entrance sequences over the topometric graph.

use crate::field::{combined_similarity, EncodedGoal, SemanticField, DEFAULT_VISUAL_WEIGHT};
use crate::geometry::Point;
use crate::grid::{CellState, OccupancyGrid};
use crate::pathfind::astar;
use crate::scenario::Instruction;
use crate::seeded::sub_rng;
use crate::topo::{region_anchor, region_geodesic, RegionLabeling, TopoGraph, VertexKind};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SAMPLE_DENSITY: f64 = 4.0;
/// Similarity floor below which a query counts as "target not found".
pub const TAU_SIM: f64 = 0.2;
/// Goal positions snap to a Free cell within this radius when needed.
pub const GOAL_SNAP_RADIUS_M: f64 = 1.0;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplePointSet {
    pub points: Vec<Point>,
    pub density: f64,
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum GlobalError {
    #[error("no samples: grid has no free space at this density")]
    NoSamples,
    #[error("target not found: best similarity {best:.3} below threshold {tau:.3}")]
    TargetNotFound { best: f64, tau: f64 },
    #[error("region constraint excludes all samples")]
    ConstraintEmpty,
    #[error("start position outside any region")]
    StartOutsideRegions,
    #[error("goal position outside any region")]
    GoalOutsideRegions,
    #[error("unreachable: no entrance path between start and goal regions")]
    Unreachable,
    #[error(transparent)]
    Field(#[from] crate::field::FieldError),
}

/// Stratified free-space sampling: one seeded point per tile of pitch
/// 1/sqrt(density), drawn uniformly from the tile's Free cells. Every
/// object extent of at least a tile's size is guaranteed a sample.
pub fn sample_free_points(
    grid: &OccupancyGrid,
    density: f64,
    seed: u64,
) -> Result<SamplePointSet, GlobalError> {
    use rand::Rng;
    let pitch = 1.0 / density.sqrt();
    let tiles_x = (grid.width as f64 * grid.cell_size_m / pitch).ceil() as usize;
    let tiles_y = (grid.height as f64 * grid.cell_size_m / pitch).ceil() as usize;
    let per_tile = (pitch / grid.cell_size_m).round() as usize;
    let mut points = Vec::new();
    for ty in 0..tiles_y {
        for tx in 0..tiles_x {
            let mut free = Vec::new();
            for iy in ty * per_tile..((ty + 1) * per_tile).min(grid.height) {
                for ix in tx * per_tile..((tx + 1) * per_tile).min(grid.width) {
                    if grid.get(ix, iy) == CellState::Free {
                        free.push((ix, iy));
                    }
                }
            }
            if free.is_empty() {
                continue;
            }
            let mut rng = sub_rng(seed, &["samples", &tx.to_string(), &ty.to_string()]);
            let (ix, iy) = free[rng.random_range(0..free.len())];
            points.push(grid.cell_center(ix, iy));
        }
    }
    if points.is_empty() {
        return Err(GlobalError::NoSamples);
    }
    Ok(SamplePointSet {
        points,
        density,
        seed,
    })
}

/// Resolve an instruction to a goal position: Position passes through,
/// text/image queries take the similarity argmax over the samples,
/// optionally restricted to a set of allowed regions.
pub fn resolve_goal(
    instr: &Instruction,
    field: &SemanticField,
    samples: &SamplePointSet,
    labeling: &RegionLabeling,
    region_constraint: Option<&[u32]>,
) -> Result<Point, GlobalError> {
    if samples.points.is_empty() {
        return Err(GlobalError::NoSamples);
    }
    let query = match field.encode_instruction(instr)? {
        EncodedGoal::Position(p) => return Ok(p),
        EncodedGoal::Query(q) => q,
    };
    let mut best: Option<(usize, f64)> = None;
    let mut any_allowed = false;
    for (i, &p) in samples.points.iter().enumerate() {
        if let Some(allowed) = region_constraint {
            match labeling.locate_region(p) {
                Some(r) if allowed.contains(&r) => {}
                _ => continue,
            }
        }
        any_allowed = true;
        let (fv, fs) = field.query(p);
        let sim = combined_similarity(&query, &fv, &fs, DEFAULT_VISUAL_WEIGHT)?;
        if best.map_or(true, |(_, bs)| sim > bs) {
            best = Some((i, sim));
        }
    }
    if !any_allowed {
        return Err(GlobalError::ConstraintEmpty);
    }
    let (idx, sim) = best.expect("some sample was allowed");
    if sim < TAU_SIM {
        return Err(GlobalError::TargetNotFound {
            best: sim,
            tau: TAU_SIM,
        });
    }
    Ok(samples.points[idx])
}

/// Snap a goal onto a Free cell center of `grid` within the snap radius;
/// identity when the goal's own cell is already Free. None when nothing
/// free exists nearby.
pub fn snap_goal(grid: &OccupancyGrid, p: Point) -> Option<Point> {
    if grid.is_free_at(p) {
        return Some(p);
    }
    let mut best: Option<(Point, f64)> = None;
    let r = (GOAL_SNAP_RADIUS_M / grid.cell_size_m).ceil() as i64;
    let (cx, cy) = match grid.world_to_cell(p) {
        Some((x, y)) => (x as i64, y as i64),
        None => return None,
    };
    for iy in (cy - r).max(0)..=(cy + r).min(grid.height as i64 - 1) {
        for ix in (cx - r).max(0)..=(cx + r).min(grid.width as i64 - 1) {
            if grid.get(ix as usize, iy as usize) == CellState::Free {
                let c = grid.cell_center(ix as usize, iy as usize);
                let d = c.dist(p);
                if d <= GOAL_SNAP_RADIUS_M && best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((c, d));
                }
            }
        }
    }
    best.map(|(c, _)| c)
}

/// Sparse global plan: ordered entrance waypoints plus attachment costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalPlan {
    pub p_start: Point,
    pub p_end: Point,
    /// Entrance vertex positions along the optimal path, in travel order.
    pub waypoints: Vec<Point>,
    /// Entrance vertex ids matching `waypoints`.
    pub entrance_ids: Vec<u32>,
    pub total_cost_m: f64,
}

/// Dijkstra over the bipartite graph with virtual start/end attachment.
pub fn plan_global(
    g: &TopoGraph,
    labeling: &RegionLabeling,
    p_start: Point,
    p_end: Point,
) -> Result<GlobalPlan, GlobalError> {
    let r_start = labeling
        .locate_region(p_start)
        .ok_or(GlobalError::StartOutsideRegions)?;
    let r_end = labeling
        .locate_region(p_end)
        .ok_or(GlobalError::GoalOutsideRegions)?;

    let start_cell = labeling.world_to_cell(p_start).unwrap();
    let end_cell = labeling.world_to_cell(p_end).unwrap();

    if r_start == r_end {
        let trav =
            |x: usize, y: usize| labeling.region_at_cell(x, y) == Some(r_start);
        let cost = astar(
            labeling.width,
            labeling.height,
            &trav,
            start_cell,
            end_cell,
            true,
        )
        .map(|p| p.cost.meters(labeling.cell_size_m))
        .ok_or(GlobalError::Unreachable)?;
        return Ok(GlobalPlan {
            p_start,
            p_end,
            waypoints: vec![],
            entrance_ids: vec![],
            total_cost_m: cost,
        });
    }

    // virtual attachment: point -> its region vertex, weighted by the
    // intra-region geodesic from the point to the region centroid anchor
    let attach = |point_cell: (usize, usize), region: u32| -> Option<f64> {
        let anchor = region_anchor(labeling, region, labeling.centroids[region as usize])?;
        region_geodesic(labeling, region, &[], point_cell, anchor)
    };
    let w_start = attach(start_cell, r_start).ok_or(GlobalError::Unreachable)?;
    let w_end = attach(end_cell, r_end).ok_or(GlobalError::Unreachable)?;

    // Dijkstra from the start region vertex to the goal region vertex
    let ids: Vec<u32> = g.vertices.iter().map(|v| v.id).collect();
    let pos = |id: u32| ids.iter().position(|&x| x == id).unwrap();
    let n = ids.len();
    if !ids.contains(&r_start) || !ids.contains(&r_end) {
        return Err(GlobalError::Unreachable);
    }
    let mut dist: Vec<Option<f64>> = vec![None; n];
    let mut prev: Vec<Option<usize>> = vec![None; n];
    let mut done = vec![false; n];
    dist[pos(r_start)] = Some(w_start);
    loop {
        let mut u: Option<(usize, f64)> = None;
        for i in 0..n {
            if done[i] {
                continue;
            }
            if let Some(d) = dist[i] {
                let better = match u {
                    None => true,
                    Some((uj, ud)) => d < ud || (d == ud && ids[i] < ids[uj]),
                };
                if better {
                    u = Some((i, d));
                }
            }
        }
        let Some((i, d)) = u else {
            return Err(GlobalError::Unreachable);
        };
        if ids[i] == r_end {
            break;
        }
        done[i] = true;
        let mut nbrs = g.neighbors(ids[i]);
        nbrs.sort_by_key(|&(id, _)| id);
        for (nb, w) in nbrs {
            if !w.is_finite() {
                continue;
            }
            let j = pos(nb);
            let nd = d + w;
            if dist[j].map_or(true, |old| nd < old) {
                dist[j] = Some(nd);
                prev[j] = Some(i);
            }
        }
    }

    let total = dist[pos(r_end)].unwrap() + w_end;
    let mut chain = vec![pos(r_end)];
    while let Some(p) = prev[*chain.last().unwrap()] {
        chain.push(p);
    }
    chain.reverse();
    let mut waypoints = Vec::new();
    let mut entrance_ids = Vec::new();
    for &i in &chain {
        let v = &g.vertices[i];
        if let VertexKind::Entrance { position, .. } = &v.kind {
            waypoints.push(*position);
            entrance_ids.push(v.id);
        }
    }
    Ok(GlobalPlan {
        p_start,
        p_end,
        waypoints,
        entrance_ids,
        total_cost_m: total,
    })
}

/// Copy of the graph with both edges of one entrance removed from search.
pub fn penalize_edge(g: &TopoGraph, entrance_id: u32) -> TopoGraph {
    let mut out = g.clone();
    out.edges.retain(|e| e.a != entrance_id && e.b != entrance_id);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::SemanticField;
    use crate::geometry::{Pose, Rect};
    use crate::grid::rasterize;
    use crate::scenario::{Door, ObjectSpec, Room, Scenario};
    use crate::topo::{build_topo_graph, segment_regions};

    fn fixture3r() -> Scenario {
        Scenario {
            name: "fixture3r".into(),
            cell_size_m: 0.1,
            bounds_m: [12.0, 4.0],
            rooms: vec![
                Room { id: 0, label: "living room".into(), rect: Rect::new(0.0, 0.0, 4.0, 4.0) },
                Room { id: 1, label: "hall".into(), rect: Rect::new(4.0, 0.0, 8.0, 4.0) },
                Room { id: 2, label: "kitchen".into(), rect: Rect::new(8.0, 0.0, 12.0, 4.0) },
            ],
            doors: vec![
                Door { id: "d0".into(), connects: [0, 1], position: Point::new(4.0, 2.0), width_m: 0.9 },
                Door { id: "d1".into(), connects: [1, 2], position: Point::new(8.0, 2.0), width_m: 0.9 },
            ],
            objects: vec![ObjectSpec {
                id: "chair_1".into(),
                label: "chair".into(),
                room: 2,
                rect: Rect::new(10.2, 1.6, 11.0, 2.4),
                blocking: false,
            }],
            dynamic_obstacles: vec![],
            start: Pose::xy(1.0, 2.0, 0.0),
            tasks: vec![],
        }
    }

    fn setup() -> (Scenario, crate::grid::OccupancyGrid, RegionLabeling, TopoGraph) {
        let s = fixture3r();
        let g = rasterize(&s, false);
        let lab = segment_regions(&g, &s.doors, &s.rooms);
        let topo = build_topo_graph(&lab, &s.doors);
        (s, g, lab, topo)
    }

    #[test]
    fn sampling_count_membership_determinism() {
        let (_, g, _, _) = setup();
        let a = sample_free_points(&g, 4.0, 42).unwrap();
        let b = sample_free_points(&g, 4.0, 42).unwrap();
        assert_eq!(a.points, b.points);
        // about density * free_area points: free area ~43.6 m2, one point
        // per 0.5 m tile that holds free cells
        assert!(
            (150..=200).contains(&a.points.len()),
            "got {} samples",
            a.points.len()
        );
        for &p in &a.points {
            assert!(g.is_free_at(p));
        }
        let c = sample_free_points(&g, 4.0, 7).unwrap();
        assert_ne!(a.points, c.points);
    }

    #[test]
    fn text_goal_lands_in_chair_extent() {
        let (s, g, lab, _) = setup();
        let field = SemanticField::from_scenario(&s, 64, 42);
        let samples = sample_free_points(&g, 4.0, 42).unwrap();
        let p = resolve_goal(
            &Instruction::Text {
                target_label: "chair".into(),
                region_label: Some("kitchen".into()),
            },
            &field,
            &samples,
            &lab,
            None,
        )
        .unwrap();
        let chair = Rect::new(10.2, 1.6, 11.0, 2.4);
        assert!(chair.contains(p), "goal {p:?} outside chair extent");
    }

    #[test]
    fn position_goal_bypasses() {
        let (s, g, lab, _) = setup();
        let field = SemanticField::from_scenario(&s, 64, 42);
        let samples = sample_free_points(&g, 4.0, 42).unwrap();
        let p = resolve_goal(
            &Instruction::Position { position: Point::new(3.0, 3.0) },
            &field,
            &samples,
            &lab,
            None,
        )
        .unwrap();
        assert_eq!(p, Point::new(3.0, 3.0));
    }

    #[test]
    fn absent_label_not_found() {
        let (s, g, lab, _) = setup();
        let field = SemanticField::from_scenario(&s, 64, 42);
        let samples = sample_free_points(&g, 4.0, 42).unwrap();
        let err = resolve_goal(
            &Instruction::Text { target_label: "piano".into(), region_label: None },
            &field,
            &samples,
            &lab,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, GlobalError::TargetNotFound { .. }), "{err}");
    }

    #[test]
    fn region_constraint_restricts_argmax() {
        let (s, g, lab, _) = setup();
        let field = SemanticField::from_scenario(&s, 64, 42);
        let samples = sample_free_points(&g, 4.0, 42).unwrap();
        let hall = lab.region_by_label("hall");
        let p = resolve_goal(
            &Instruction::Text { target_label: "hall".into(), region_label: None },
            &field,
            &samples,
            &lab,
            Some(&hall),
        )
        .unwrap();
        assert_eq!(lab.locate_region(p), Some(hall[0]));
        let err = resolve_goal(
            &Instruction::Text { target_label: "chair".into(), region_label: None },
            &field,
            &samples,
            &lab,
            Some(&[]),
        )
        .unwrap_err();
        assert!(matches!(err, GlobalError::ConstraintEmpty));
    }

    #[test]
    fn fixture_plan_cost_and_waypoints() {
        let (_, _, lab, topo) = setup();
        let plan = plan_global(&topo, &lab, Point::new(1.0, 2.0), Point::new(10.0, 2.0)).unwrap();
        assert_eq!(plan.waypoints.len(), 2);
        assert!(plan.waypoints[0].dist(Point::new(4.0, 2.0)) < 1e-9);
        assert!(plan.waypoints[1].dist(Point::new(8.0, 2.0)) < 1e-9);
        assert!(
            (plan.total_cost_m - 9.0).abs() <= 0.2,
            "cost {}",
            plan.total_cost_m
        );
    }

    #[test]
    fn same_region_plan_is_empty_with_geodesic_cost() {
        let (_, _, lab, topo) = setup();
        let plan = plan_global(&topo, &lab, Point::new(1.0, 1.0), Point::new(3.0, 3.0)).unwrap();
        assert!(plan.waypoints.is_empty());
        let direct = Point::new(1.0, 1.0).dist(Point::new(3.0, 3.0));
        assert!(plan.total_cost_m >= direct - 0.2);
        assert!(plan.total_cost_m <= direct + 0.2);
    }

    #[test]
    fn penalizing_the_only_door_disconnects() {
        let (_, _, lab, topo) = setup();
        // entrance vertex id 4 is the hall-kitchen door
        let gp = penalize_edge(&topo, 4);
        let err = plan_global(&gp, &lab, Point::new(1.0, 2.0), Point::new(10.0, 2.0)).unwrap_err();
        assert!(matches!(err, GlobalError::Unreachable));
        // a same-region plan is unaffected
        let ok = plan_global(&gp, &lab, Point::new(1.0, 1.0), Point::new(3.0, 3.0)).unwrap();
        assert!(ok.waypoints.is_empty());
    }

    #[test]
    fn dijkstra_matches_brute_force_on_fixture() {
        let (_, _, lab, topo) = setup();
        let p_start = Point::new(1.0, 2.0);
        let p_end = Point::new(10.0, 2.0);
        let plan = plan_global(&topo, &lab, p_start, p_end).unwrap();
        let brute = brute_force_cost(&topo, &lab, p_start, p_end).unwrap();
        assert_eq!(plan.total_cost_m, brute);
    }

    /// Enumerate all simple alternating paths start-region -> goal-region,
    /// folding costs left to right exactly as Dijkstra does.
    pub(crate) fn brute_force_cost(
        g: &TopoGraph,
        lab: &RegionLabeling,
        p_start: Point,
        p_end: Point,
    ) -> Option<f64> {
        let r_start = lab.locate_region(p_start)?;
        let r_end = lab.locate_region(p_end)?;
        let start_cell = lab.world_to_cell(p_start)?;
        let end_cell = lab.world_to_cell(p_end)?;
        if r_start == r_end {
            let trav = |x: usize, y: usize| lab.region_at_cell(x, y) == Some(r_start);
            return astar(lab.width, lab.height, &trav, start_cell, end_cell, true)
                .map(|p| p.cost.meters(lab.cell_size_m));
        }
        let attach = |cell: (usize, usize), region: u32| -> Option<f64> {
            let anchor = region_anchor(lab, region, lab.centroids[region as usize])?;
            region_geodesic(lab, region, &[], cell, anchor)
        };
        let w_start = attach(start_cell, r_start)?;
        let w_end = attach(end_cell, r_end)?;
        let mut best: Option<f64> = None;
        let mut visited = vec![r_start];
        dfs(g, r_start, r_end, w_start, &mut visited, &mut best);
        best.map(|b| b + w_end)
    }

    fn dfs(
        g: &TopoGraph,
        at: u32,
        goal: u32,
        cost: f64,
        visited: &mut Vec<u32>,
        best: &mut Option<f64>,
    ) {
        if at == goal {
            if best.map_or(true, |b| cost < b) {
                *best = Some(cost);
            }
            return;
        }
        for (nb, w) in g.neighbors(at) {
            if !w.is_finite() || visited.contains(&nb) {
                continue;
            }
            visited.push(nb);
            dfs(g, nb, goal, cost + w, visited, best);
            visited.pop();
        }
    }
}
