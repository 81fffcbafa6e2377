//! Map a scenario by wall following instead of using the oracle grid, then
//! render the driven trajectory to an SVG next to the coverage numbers.

use hiernav::grid::{rasterize, CellState};
use hiernav::scenario::load_scenario;
use hiernav::svg::{render_svg, SvgScene};
use hiernav::{map_scenario, ExploreMode};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/fixture3r.json");
    let scenario = load_scenario(path).unwrap();

    let (report, poses) = map_scenario(&scenario, ExploreMode::WallFollow, 20_000);
    let report = report.unwrap();
    println!("loop closed   {}", report.loop_closed);
    println!("coverage      {:.1}%", report.coverage * 100.0);
    println!("poses driven  {}", poses.len());

    let truth = rasterize(&scenario, false);
    let mut agree = 0usize;
    let mut seen = 0usize;
    for (ix, iy, state) in report.memory.iter_cells() {
        if state == CellState::Unknown {
            continue;
        }
        seen += 1;
        if state == truth.get(ix, iy) {
            agree += 1;
        }
    }
    println!("memory agrees with the static grid on {agree} of {seen} known cells");

    let traj: Vec<_> = poses.iter().map(|tp| tp.position).collect();
    let svg = render_svg(
        &scenario,
        &SvgScene { trajectory: &traj, ..Default::default() },
    );
    let out = std::env::temp_dir().join("hiernav_wall_follow.svg");
    std::fs::write(&out, svg).unwrap();
    println!("trajectory drawn to {}", out.display());
}
