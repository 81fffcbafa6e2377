//! Acceptance gate: one test per release criterion, each ending in a single
//! `criterion N: PASS (...)` line. Corpora shared between criteria are built
//! once behind `OnceLock` and reused, so the suite stays deterministic and
//! every episode is run exactly once.

use std::sync::OnceLock;
use std::time::Instant;

use hiernav::agent::{run_episode, RunConfig};
use hiernav::bench::{add_route_obstacles, json_without_timestamp, BenchConfig};
use hiernav::field::SemanticField;
use hiernav::geometry::Point;
use hiernav::grid::{rasterize, CellState, OccupancyGrid};
use hiernav::metrics::{compute_sr_spl, oracle_grid, oracle_shortest, EpisodeOutcome};
use hiernav::planner::global::{plan_global, resolve_goal, sample_free_points, snap_goal};
use hiernav::run_bench;
use hiernav::scenario::{Instruction, Scenario};
use hiernav::topo::{
    build_topo_graph, region_anchor, region_geodesic, segment_regions, RegionLabeling, TopoGraph,
};
use hiernav::trace::TraceWriter;
use hiernav::worldgen::{generate_scenario, GenParams};
use hiernav::ScriptedBackend;

fn gen(seed: u64, n_rooms: usize) -> Scenario {
    generate_scenario(&GenParams { n_rooms, seed, ..GenParams::default() }).unwrap()
}

struct CleanEp {
    scenario: usize,
    outcome: EpisodeOutcome,
    collisions: u32,
    wall_ms: u128,
    events: Vec<serde_json::Value>,
}

/// 100 clean scenarios with 5..=10 rooms, every task, scripted backend.
struct CleanSuite {
    oracle_grids: Vec<OccupancyGrid>,
    episodes: Vec<CleanEp>,
}

static CLEAN: OnceLock<CleanSuite> = OnceLock::new();

fn clean_suite() -> &'static CleanSuite {
    CLEAN.get_or_init(|| {
        let scenarios: Vec<Scenario> =
            (0..100u64).map(|i| gen(30_000 + i, 5 + (i as usize % 6))).collect();
        let oracle_grids: Vec<OccupancyGrid> = scenarios.iter().map(oracle_grid).collect();
        let mut episodes = Vec::new();
        for (si, s) in scenarios.iter().enumerate() {
            for ti in 0..s.tasks.len() {
                let mut backend = ScriptedBackend;
                let mut trace = TraceWriter::capture_events_only();
                let t0 = Instant::now();
                let res = run_episode(s, ti, &RunConfig::default(), &mut backend, &mut trace)
                    .expect("episode setup");
                let wall_ms = t0.elapsed().as_millis();
                let oracle = res
                    .p_end
                    .and_then(|p| oracle_shortest(&oracle_grids[si], s.start.position, p).ok());
                episodes.push(CleanEp {
                    scenario: si,
                    outcome: EpisodeOutcome {
                        success: res.success,
                        path_length_m: res.path_length_m,
                        oracle_length_m: oracle,
                    },
                    collisions: res.collisions,
                    wall_ms,
                    events: trace.events(),
                });
            }
        }
        CleanSuite { oracle_grids, episodes }
    })
}

/// 50 scenarios, first task only, 0..=3 obstacles dropped on the route,
/// each run by the full system and by the no-local ablation.
struct ObstacleSuite {
    full_sr: [f64; 4],
    no_local_sr: [f64; 4],
    traces: Vec<Vec<serde_json::Value>>,
}

static OBSTACLES: OnceLock<ObstacleSuite> = OnceLock::new();

fn obstacle_suite() -> &'static ObstacleSuite {
    OBSTACLES.get_or_init(|| {
        let scenarios: Vec<Scenario> = (0..50u64)
            .map(|i| {
                let mut s = gen(900 + i, 5 + (i as usize % 4));
                s.tasks.truncate(1);
                s
            })
            .collect();
        let mut full_sr = [0.0; 4];
        let mut no_local_sr = [0.0; 4];
        let mut traces = Vec::new();
        for count in 0..4usize {
            let mut hits = [0u32; 2];
            for s in &scenarios {
                let sk = add_route_obstacles(s, count, 7);
                for (which, no_local) in [false, true].into_iter().enumerate() {
                    let cfg = RunConfig { no_local, ..RunConfig::default() };
                    let mut backend = ScriptedBackend;
                    let mut trace = TraceWriter::capture_events_only();
                    let res = run_episode(&sk, 0, &cfg, &mut backend, &mut trace)
                        .expect("episode setup");
                    if res.success {
                        hits[which] += 1;
                    }
                    traces.push(trace.events());
                }
            }
            full_sr[count] = f64::from(hits[0]) / scenarios.len() as f64;
            no_local_sr[count] = f64::from(hits[1]) / scenarios.len() as f64;
        }
        ObstacleSuite { full_sr, no_local_sr, traces }
    })
}

/// Exhaustive minimum over simple vertex paths, with the same per-leg cost
/// model as `plan_global`. Costs accumulate in travel order, so the optimal
/// route produces a bitwise-identical total and the comparison can be exact.
fn brute_force_cost(
    g: &TopoGraph,
    labeling: &RegionLabeling,
    p_start: Point,
    p_end: Point,
) -> Option<f64> {
    let r_start = labeling.locate_region(p_start)?;
    let r_end = labeling.locate_region(p_end)?;
    let start_cell = labeling.world_to_cell(p_start)?;
    let end_cell = labeling.world_to_cell(p_end)?;
    if r_start == r_end {
        return region_geodesic(labeling, r_start, &[], start_cell, end_cell);
    }
    let attach = |cell: (usize, usize), region: u32| -> Option<f64> {
        let anchor = region_anchor(labeling, region, labeling.centroids[region as usize])?;
        region_geodesic(labeling, region, &[], cell, anchor)
    };
    let w_start = attach(start_cell, r_start)?;
    let w_end = attach(end_cell, r_end)?;

    fn dfs(
        g: &TopoGraph,
        cur: u32,
        goal: u32,
        acc: f64,
        visited: &mut Vec<u32>,
        best: &mut Option<f64>,
    ) {
        if cur == goal {
            if best.is_none_or(|b| acc < b) {
                *best = Some(acc);
            }
            return;
        }
        for (nb, w) in g.neighbors(cur) {
            if visited.contains(&nb) {
                continue;
            }
            visited.push(nb);
            dfs(g, nb, goal, acc + w, visited, best);
            visited.pop();
        }
    }
    let mut best = None;
    dfs(g, r_start, r_end, w_start, &mut vec![r_start], &mut best);
    best.map(|b| b + w_end)
}

#[test]
fn c1_global_plan_matches_brute_force_exactly() {
    let t0 = Instant::now();
    let mut checked = 0usize;
    let mut seed = 10_000u64;
    while checked < 200 {
        let s = gen(seed, 3 + (seed % 3) as usize);
        seed += 1;
        let grid = rasterize(&s, false);
        let labeling = segment_regions(&grid, &s.doors, &s.rooms);
        let g = build_topo_graph(&labeling, &s.doors);
        if g.vertices.len() > 12 {
            continue;
        }
        // rotate the goal region across scenarios; centroids can sit inside
        // furniture, so snap to free space the way a caller would
        let r_goal = checked % labeling.n_regions();
        let Some(p_end) = snap_goal(&grid, labeling.centroids[r_goal]) else {
            continue;
        };
        if labeling.locate_region(p_end).is_none() {
            continue;
        }
        let p_start = s.start.position;
        let planned = plan_global(&g, &labeling, p_start, p_end);
        let brute = brute_force_cost(&g, &labeling, p_start, p_end);
        match (planned, brute) {
            (Ok(plan), Some(want)) => {
                assert_eq!(plan.total_cost_m, want, "cost mismatch at seed {}", seed - 1);
            }
            (Err(_), None) => {}
            (got, want) => panic!(
                "reachability disagreement at seed {}: {:?} vs {:?}",
                seed - 1,
                got.map(|p| p.total_cost_m),
                want
            ),
        }
        checked += 1;
    }
    let dt = t0.elapsed().as_secs_f64();
    assert!(dt < 5.0, "comparison took {dt:.2} s");
    println!("criterion 1: PASS (200 scenarios, exact cost match, {dt:.2} s)");
}

#[test]
fn c2_resolved_goals_land_in_the_named_object() {
    let mut text_total = 0u32;
    let mut image_hits = 0u32;
    let mut image_total = 0u32;
    for i in 0..200u64 {
        let s = gen(20_000 + i, 4 + (i as usize % 4));
        let grid = rasterize(&s, false);
        let labeling = segment_regions(&grid, &s.doors, &s.rooms);
        let field = SemanticField::from_scenario(&s, 64, 0);
        // dense sampling: the stratified sampler guarantees a point inside
        // every extent that spans a full tile, so the pitch must be at most
        // half the smallest object dimension (0.6 m)
        let samples = sample_free_points(&grid, 16.0, 0).unwrap();
        for task in &s.tasks {
            match task {
                Instruction::Text { target_label, region_label } => {
                    let constraint =
                        region_label.as_ref().map(|r| labeling.region_by_label(r));
                    let p = resolve_goal(task, &field, &samples, &labeling, constraint.as_deref())
                        .expect("text goal resolves");
                    let room_id = region_label.as_ref().map(|r| {
                        s.rooms.iter().find(|room| &room.label == r).expect("room label").id
                    });
                    let hit = s.objects.iter().any(|o| {
                        o.label == *target_label
                            && room_id.is_none_or(|id| o.room == id)
                            && o.rect.contains(p)
                    });
                    assert!(hit, "text goal outside the target extent (seed {})", 20_000 + i);
                    text_total += 1;
                }
                Instruction::Image { embedding_seed } => {
                    image_total += 1;
                    let o = s.objects.iter().find(|o| &o.id == embedding_seed).unwrap();
                    if let Ok(p) = resolve_goal(task, &field, &samples, &labeling, None) {
                        if o.rect.contains(p) {
                            image_hits += 1;
                        }
                    }
                }
                Instruction::Position { .. } => {}
            }
        }
    }
    let image_rate = f64::from(image_hits) / f64::from(image_total);
    assert!(image_rate >= 0.95, "image-goal hit rate {image_rate:.3}");
    println!(
        "criterion 2: PASS (text {text_total}/{text_total}, image {image_hits}/{image_total} = {image_rate:.3})"
    );
}

#[test]
fn c3_clean_scenarios_navigate_reliably_and_fast() {
    let suite = clean_suite();
    let outcomes: Vec<EpisodeOutcome> = suite.episodes.iter().map(|e| e.outcome).collect();
    let (sr, spl) = compute_sr_spl(&outcomes);
    let slowest = suite.episodes.iter().map(|e| e.wall_ms).max().unwrap();
    assert!(sr >= 0.95, "SR {sr:.3}");
    assert!(spl >= 0.80, "SPL {spl:.3}");
    assert!(slowest < 1000, "slowest episode took {slowest} ms");
    println!(
        "criterion 3: PASS ({} episodes, SR {sr:.3}, SPL {spl:.3}, slowest {slowest} ms)",
        outcomes.len()
    );
}

#[test]
fn c4_spl_decays_with_room_distance_without_the_graph() {
    let scenarios: Vec<Scenario> =
        (0..80u64).map(|i| gen(40_000 + i, 6 + (i as usize % 5))).collect();
    let full = run_bench(&scenarios, &BenchConfig::default());
    let ablated = run_bench(&scenarios, &BenchConfig { no_global: true, ..BenchConfig::default() });
    let full_buckets = full.metrics_by_hops();
    let ablated_buckets = ablated.metrics_by_hops();

    let mut full_spl = Vec::new();
    let mut ablated_spl = Vec::new();
    for hops in 1..=4u32 {
        let (_, f) = *full_buckets
            .get(&hops)
            .unwrap_or_else(|| panic!("no full-system episodes at {hops} hops"));
        let (_, a) = *ablated_buckets
            .get(&hops)
            .unwrap_or_else(|| panic!("no ablation episodes at {hops} hops"));
        assert!(a <= f, "hop {hops}: ablation SPL {a:.3} above full-system {f:.3}");
        full_spl.push(f);
        ablated_spl.push(a);
    }
    for pair in ablated_spl.windows(2) {
        assert!(
            pair[1] < pair[0],
            "ablation SPL not strictly decreasing: {ablated_spl:?}"
        );
    }
    let decline = full_spl[0] - full_spl[3];
    assert!(decline < 0.15, "full-system SPL fell {decline:.3} from 1 to 4 hops");
    println!(
        "criterion 4: PASS (no-global SPL {:.3}/{:.3}/{:.3}/{:.3}, full decline {decline:.3})",
        ablated_spl[0], ablated_spl[1], ablated_spl[2], ablated_spl[3]
    );
}

#[test]
fn c5_obstacles_collapse_sr_without_local_planning() {
    let suite = obstacle_suite();
    for count in 1..4 {
        assert!(
            suite.full_sr[count] <= suite.full_sr[count - 1],
            "full-system SR increased with obstacle count: {:?}",
            suite.full_sr
        );
        assert!(
            suite.full_sr[count] >= suite.no_local_sr[count],
            "no-local SR above full-system at {count} obstacles"
        );
    }
    let gap = suite.full_sr[3] - suite.no_local_sr[3];
    assert!(gap >= 0.2, "SR gap at 3 obstacles only {gap:.3}");
    println!(
        "criterion 5: PASS (full SR {:?}, no-local SR {:?}, gap at 3 = {gap:.2})",
        suite.full_sr, suite.no_local_sr
    );
}

#[test]
fn c6_every_global_replan_follows_a_trigger() {
    let clean = clean_suite();
    let obstacles = obstacle_suite();
    let mut replans = 0u32;
    let all = clean.episodes.iter().map(|e| &e.events).chain(obstacles.traces.iter());
    for events in all {
        let mut triggered = false;
        for ev in events {
            match ev["event"].as_str().unwrap_or("") {
                "local_blocked" | "segment_timeout" | "visit_limit" => triggered = true,
                "replan_global" => {
                    assert!(triggered, "replan_global without a preceding trigger event");
                    triggered = false;
                    replans += 1;
                }
                _ => {}
            }
        }
    }
    assert!(replans > 0, "corpus exercised no global replans");
    println!("criterion 6: PASS ({replans} global replans, each preceded by a trigger)");
}

#[test]
fn c7_spl_fixtures_match_hand_computation() {
    let eps = 1e-12;
    let optimal = EpisodeOutcome { success: true, path_length_m: 8.0, oracle_length_m: Some(8.0) };
    let (sr, spl) = compute_sr_spl(std::slice::from_ref(&optimal));
    assert!((sr - 1.0).abs() < eps && (spl - 1.0).abs() < eps, "optimal run: ({sr}, {spl})");

    let doubled = EpisodeOutcome { success: true, path_length_m: 16.0, oracle_length_m: Some(8.0) };
    assert!((doubled.spl_contrib() - 0.5).abs() < eps, "doubled path: {}", doubled.spl_contrib());

    let pair = [
        EpisodeOutcome { success: false, path_length_m: 3.0, oracle_length_m: Some(8.0) },
        optimal,
    ];
    let (sr2, spl2) = compute_sr_spl(&pair);
    assert!((sr2 - 0.5).abs() < eps && (spl2 - 0.5).abs() < eps, "mixed pair: ({sr2}, {spl2})");
    println!("criterion 7: PASS (three fixtures within 1e-12)");
}

#[test]
fn c8_bench_reports_are_deterministic() {
    let scenarios: Vec<Scenario> =
        (0..10u64).map(|i| gen(50_000 + i, 5 + (i as usize % 4))).collect();
    let cfg = BenchConfig::default();
    let first = run_bench(&scenarios, &cfg);
    let second = run_bench(&scenarios, &cfg);
    assert_eq!(
        json_without_timestamp(&first.to_json()),
        json_without_timestamp(&second.to_json())
    );
    assert_eq!(first.to_csv(), second.to_csv());
    println!("criterion 8: PASS ({} rows byte-identical across runs)", first.rows.len());
}

#[test]
fn c9_planned_waypoints_stay_out_of_inflated_obstacles() {
    let suite = clean_suite();
    let mut waypoints = 0u64;
    let mut collisions = 0u32;
    for ep in &suite.episodes {
        collisions += ep.collisions;
        let grid = &suite.oracle_grids[ep.scenario];
        for ev in &ep.events {
            if ev["event"] == "local_plan" {
                for w in ev["waypoints"].as_array().unwrap() {
                    let p = Point::new(w[0].as_f64().unwrap(), w[1].as_f64().unwrap());
                    let (ix, iy) = grid.world_to_cell(p).expect("waypoint inside bounds");
                    assert_ne!(
                        grid.get(ix, iy),
                        CellState::Occupied,
                        "waypoint ({:.2}, {:.2}) inside an inflated obstacle",
                        p.x,
                        p.y
                    );
                    waypoints += 1;
                }
            }
        }
    }
    assert_eq!(collisions, 0, "collision events in static scenes");
    println!("criterion 9: PASS ({waypoints} waypoints clear, 0 collisions)");
}
