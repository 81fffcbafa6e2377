//! Cast a simulated depth scan in the three-room fixture and show what the
//! robot sees from its start pose.

use hiernav::grid::rasterize;
use hiernav::scenario::load_scenario;
use hiernav::sensor::{simulate_depth, ScanParams};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/fixture3r.json");
    let scenario = load_scenario(path).unwrap();
    let grid = rasterize(&scenario, false);

    let scan = simulate_depth(&grid, scenario.start, ScanParams::default()).unwrap();
    let params = ScanParams::default();
    println!(
        "{} rays over {:.0} deg, max range {:.1} m, from ({:.1}, {:.1}) facing +x",
        scan.ranges.len(),
        params.fov_rad.to_degrees(),
        params.max_range_m,
        scenario.start.position.x,
        scenario.start.position.y,
    );

    let n = scan.ranges.len();
    for i in [0, n / 4, n / 2, 3 * n / 4, n - 1] {
        let bearing = scan.bearing(i);
        let hit = scan
            .hit_point(i)
            .map(|p| format!("wall at ({:.2}, {:.2})", p.x, p.y))
            .unwrap_or_else(|| "open space".into());
        println!("ray {i:3}  bearing {:+6.1} deg  range {:.2} m  {}", bearing.to_degrees(), scan.ranges[i], hit);
    }

    let through_door = scan.ranges[n / 2];
    println!("center ray sees {through_door:.2} m down the corridor of aligned doors");
}
