//! Run a complete navigation episode with the scripted policy and print the
//! outcome summary plus the trace events it produced.

use hiernav::scenario::load_scenario;
use hiernav::trace::TraceWriter;
use hiernav::{run_episode, RunConfig, ScriptedBackend};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/fixture3r.json");
    let scenario = load_scenario(path).unwrap();

    let mut backend = ScriptedBackend::default();
    let mut trace = TraceWriter::capture_events_only();
    let res = run_episode(&scenario, 0, &RunConfig::default(), &mut backend, &mut trace).unwrap();

    println!("termination      {:?}", res.termination);
    println!("success          {}", res.success);
    println!("path length      {:.2} m", res.path_length_m);
    println!("sim time         {:.1} s", res.sim_time_s);
    println!("replans          {} local, {} global", res.replans.local, res.replans.global);
    println!("collisions       {}", res.collisions);
    if let Some(p) = res.p_end {
        println!("resolved goal    ({:.2}, {:.2})", p.x, p.y);
    }

    let lines = trace.lines();
    println!("\n{} trace events; the first few:", lines.len());
    for line in lines.iter().take(8) {
        println!("  {line}");
    }
}
