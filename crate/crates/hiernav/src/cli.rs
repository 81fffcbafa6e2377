//! Command-line entry points: single-episode runs, scenario generation,
//! and benchmark suites. Exit codes: 0 success, 1 failed episode, 2
//! configuration error.

use crate::agent::policy::DecisionBackend;
use crate::agent::{run_episode, RunConfig, ScriptedBackend, ServiceBackend};
use crate::agent::explore::ExploreMode;
use crate::bench::{run_bench, BenchConfig};
use crate::geometry::Point;
use crate::scenario::{load_scenario, Scenario};
use crate::svg::{render_svg, SvgScene};
use crate::trace::TraceWriter;
use crate::worldgen::{generate_scenario, GenParams};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "hiernav", version, about = "Hierarchical zero-shot object navigation")]
pub struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one episode of one scenario task
    Run(RunArgs),
    /// Generate a seeded multi-room scenario
    Gen(GenArgs),
    /// Run a benchmark suite and write reports
    Bench(BenchArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario JSON file
    #[arg(long)]
    scenario: PathBuf,
    /// Task index within the scenario
    #[arg(long, default_value_t = 0)]
    task: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write a JSONL trace here
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write a top-down SVG plot here
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Skip the topometric graph; local planning straight to the goal
    #[arg(long)]
    no_global: bool,
    /// Skip local costmap planning; drive straight lines between waypoints
    #[arg(long)]
    no_local: bool,
    /// "scripted" or a decision-service address like 127.0.0.1:7777
    #[arg(long, default_value = "scripted")]
    backend: String,
    /// "oracle" or "wallfollow"
    #[arg(long, default_value = "oracle")]
    explore: String,
    #[arg(long, default_value_t = crate::agent::DEFAULT_STEP_BUDGET)]
    step_budget: u32,
}

#[derive(Args)]
struct GenArgs {
    /// Number of rooms (at least 2)
    #[arg(long)]
    rooms: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 3.0)]
    room_min: f64,
    #[arg(long, default_value_t = 5.0)]
    room_max: f64,
}

#[derive(Args)]
struct BenchArgs {
    /// Scenario files or directories of scenario JSON files
    #[arg(long, num_args = 1.., required = true)]
    scenarios: Vec<PathBuf>,
    /// Episodes per task
    #[arg(long, default_value_t = 1)]
    repeats: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ablations: "no-global" and/or "no-local"
    #[arg(long, value_parser = ["no-global", "no-local"])]
    ablate: Vec<String>,
    #[arg(long, default_value = "scripted")]
    backend: String,
    #[arg(long, default_value = "oracle")]
    explore: String,
    /// Report directory for report.json and report.csv
    #[arg(long, default_value = "bench-out")]
    out: PathBuf,
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("HIERNAV_LOG", "error");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}

fn make_backend(name: &str) -> Box<dyn DecisionBackend> {
    if name == "scripted" {
        Box::new(ScriptedBackend)
    } else {
        Box::new(ServiceBackend::new(name))
    }
}

fn parse_explore(s: &str) -> Result<ExploreMode, String> {
    s.parse::<ExploreMode>()
}

/// Parse argv and dispatch; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap uses 0 for --help/--version and 2 for usage errors
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match cli.command {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Gen(args) => cmd_gen(args),
        Cmd::Bench(args) => cmd_bench(args),
    }
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}

fn cmd_run(args: RunArgs) -> i32 {
    let scenario = match load_scenario(&args.scenario) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let explore = match parse_explore(&args.explore) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cfg = RunConfig {
        seed: args.seed,
        explore,
        no_global: args.no_global,
        no_local: args.no_local,
        step_budget: args.step_budget,
        ..RunConfig::default()
    };
    let mut trace = match &args.trace {
        Some(p) => match TraceWriter::to_file(p) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: cannot open trace file: {e}");
                return 2;
            }
        },
        None => TraceWriter::null(),
    };
    let mut backend = make_backend(&args.backend);
    let res = match run_episode(&scenario, args.task, &cfg, backend.as_mut(), &mut trace) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    println!(
        "termination={} success={} path_length_m={:.3} sim_time_s={:.2} replans={}/{} collisions={}",
        res.termination.code(),
        res.success,
        res.path_length_m,
        res.sim_time_s,
        res.replans.local,
        res.replans.global,
        res.collisions,
    );
    if let Some(svg_path) = &args.svg {
        let traj: Vec<Point> = res.trajectory.iter().map(|t| t.position).collect();
        let scene = SvgScene {
            graph: None,
            global_waypoints: &res.global_segments,
            trajectory: &traj,
        };
        if let Err(e) = std::fs::write(svg_path, render_svg(&scenario, &scene)) {
            eprintln!("error: cannot write svg: {e}");
            return 2;
        }
    }
    if res.success {
        0
    } else {
        1
    }
}

fn cmd_gen(args: GenArgs) -> i32 {
    let params = GenParams {
        n_rooms: args.rooms,
        room_min_m: args.room_min,
        room_max_m: args.room_max,
        seed: args.seed,
    };
    let scenario = match generate_scenario(&params) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let summary = format!(
        "rooms={} doors={} seed={}",
        scenario.rooms.len(),
        scenario.doors.len(),
        args.seed
    );
    match &args.out {
        Some(path) => {
            if let Err(e) = scenario.save(path) {
                eprintln!("error: {e}");
                return 2;
            }
            println!("{summary}");
        }
        None => {
            println!("{}", scenario.to_json());
            eprintln!("{summary}");
        }
    }
    0
}

fn collect_scenarios(paths: &[PathBuf]) -> Result<Vec<Scenario>, String> {
    let mut files: Vec<PathBuf> = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inside: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| format!("{}: {e}", p.display()))?
                .filter_map(|entry| entry.ok().map(|d| d.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            inside.sort();
            files.extend(inside);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err("no scenario files found".into());
    }
    files
        .iter()
        .map(|f| load_scenario(f).map_err(|e| format!("{}: {e}", f.display())))
        .collect()
}

fn cmd_bench(args: BenchArgs) -> i32 {
    let scenarios = match collect_scenarios(&args.scenarios) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let explore = match parse_explore(&args.explore) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let cfg = BenchConfig {
        repeats: args.repeats,
        base_seed: args.seed,
        no_global: args.ablate.iter().any(|a| a == "no-global"),
        no_local: args.ablate.iter().any(|a| a == "no-local"),
        explore,
        backend: args.backend.clone(),
        step_budget: crate::agent::DEFAULT_STEP_BUDGET,
    };
    let report = run_bench(&scenarios, &cfg);
    if let Err(e) = report.write(&args.out) {
        eprintln!("error: cannot write report: {e}");
        return 2;
    }
    println!("SR={} SPL={}", report.aggregates.sr, report.aggregates.spl);
    0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_run_flags() {
        let cli = Cli::try_parse_from([
            "hiernav",
            "run",
            "--scenario",
            "s.json",
            "--task",
            "2",
            "--seed",
            "9",
            "--no-global",
            "--trace",
            "t.jsonl",
        ])
        .unwrap();
        let Cmd::Run(args) = cli.command else { panic!("expected run") };
        assert_eq!(args.task, 2);
        assert_eq!(args.seed, 9);
        assert!(args.no_global);
        assert!(!args.no_local);
        assert_eq!(args.backend, "scripted");
    }

    #[test]
    fn parses_bench_ablations() {
        let cli = Cli::try_parse_from([
            "hiernav",
            "bench",
            "--scenarios",
            "a.json",
            "b.json",
            "--ablate",
            "no-global",
            "--repeats",
            "3",
        ])
        .unwrap();
        let Cmd::Bench(args) = cli.command else { panic!("expected bench") };
        assert_eq!(args.scenarios.len(), 2);
        assert_eq!(args.ablate, ["no-global"]);
        assert_eq!(args.repeats, 3);
    }

    #[test]
    fn rejects_unknown_ablation() {
        assert!(Cli::try_parse_from(["hiernav", "bench", "--scenarios", "a", "--ablate", "bogus"])
            .is_err());
    }

    #[test]
    fn missing_scenario_file_is_config_error() {
        let code = main_with_args(["hiernav", "run", "--scenario", "/nonexistent/x.json"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn gen_one_room_is_config_error() {
        let code = main_with_args(["hiernav", "gen", "--rooms", "1"]);
        assert_eq!(code, 2);
    }
}
