//! Scratch probe.

use hiernav::agent::{run_episode, RunConfig, ScriptedBackend};
use hiernav::bench::oracle_shortest;
use hiernav::grid::{rasterize, CellState};
use hiernav::sim::DEFAULT_ROBOT_RADIUS_M;
use hiernav::trace::TraceWriter;
use hiernav::worldgen::{generate_scenario, GenParams};

fn main() {
    'outer: for i in 0..100usize {
        let s = generate_scenario(&GenParams {
            n_rooms: 5 + (i % 6),
            seed: 30_000 + i as u64,
            ..GenParams::default()
        })
        .unwrap();
        let grid = rasterize(&s, false)
            .inflate(DEFAULT_ROBOT_RADIUS_M);
        for (ti, _) in s.tasks.iter().enumerate() {
            let mut trace = TraceWriter::capture_events_only();
            let cfg = RunConfig {
                task_index: ti,
                ..RunConfig::default()
            };
            let res = run_episode(&s, &cfg, &mut ScriptedBackend, &mut trace).unwrap();
            let events = trace.into_events();
            for ev in &events {
                if ev["event"] == "local_plan" {
                    let wps = ev["waypoints"].as_array().unwrap();
                    for (wi, w) in wps.iter().enumerate() {
                        let x = w[0].as_f64().unwrap();
                        let y = w[1].as_f64().unwrap();
                        let p = hiernav::geom::Point::new(x, y);
                        let (ix, iy) = grid.world_to_cell(p).unwrap();
                        if grid.get(ix, iy) == CellState::Occupied {
                            println!(
                                "HIT scenario {i} (seed {}) task {ti}: waypoint {wi}/{} at ({x:.3},{y:.3}) seg={} t={:.2}",
                                30_000 + i,
                                wps.len(),
                                ev["segment"],
                                ev["t"].as_f64().unwrap_or(-1.0)
                            );
                            println!("  outcome {:?} steps {}", res.outcome, res.steps);
                            // dump the whole offending plan event
                            println!("  event: {}", serde_json::to_string(ev).unwrap());
                            // nearby obstacles
                            for o in &s.obstacles {
                                if o.shape.center().dist(p) < 1.5 {
                                    println!("  obstacle near: {:?}", o);
                                }
                            }
                            for d in &s.doors {
                                if d.center().dist(p) < 1.5 {
                                    println!("  door near: {:?}", d);
                                }
                            }
                            for ob in &s.objects {
                                if ob.shape.center().dist(p) < 1.5 {
                                    println!("  object near: id {} label {} blocking {}", ob.id, ob.label, ob.blocking);
                                }
                            }
                            let oracle = res
                                .p_end
                                .and_then(|pe| oracle_shortest(&grid, s.start.position, pe).ok());
                            println!("  oracle len: {:?}", oracle);
                            break 'outer;
                        }
                    }
                }
            }
        }
    }
    println!("done");
}
