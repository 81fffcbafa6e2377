//! Generate a small scenario suite, benchmark the full system on it, and
//! break success rate and path efficiency down by route length.

use hiernav::worldgen::GenParams;
use hiernav::{generate_scenario, run_bench, BenchConfig};

fn main() {
    let mut suite = Vec::new();
    for seed in 0..8 {
        let params = GenParams { n_rooms: 5 + (seed as usize % 3), seed, ..GenParams::default() };
        suite.push(generate_scenario(&params).unwrap());
    }
    println!("generated {} scenarios", suite.len());

    let report = run_bench(&suite, &BenchConfig::default());
    println!(
        "{} episodes: SR={:.3} SPL={:.3} mean sim time {:.1} s",
        report.aggregates.episodes,
        report.aggregates.sr,
        report.aggregates.spl,
        report.aggregates.mean_sim_time_s
    );

    println!("\nby room hops:");
    for (hops, (sr, spl)) in report.metrics_by_hops() {
        println!("  {hops} hops: SR={sr:.3} SPL={spl:.3}");
    }

    let out = std::env::temp_dir().join("hiernav_bench_out");
    report.write(&out).unwrap();
    println!("\nreport.json and report.csv written to {}", out.display());
}
