//! Generate a seeded multi-room scenario, validate it, and render a
//! top-down SVG of the floor plan.

use hiernav::svg::{render_svg, SvgScene};
use hiernav::worldgen::{generate_scenario, GenParams};

fn main() {
    let params = GenParams { n_rooms: 7, seed: 42, ..GenParams::default() };
    let scenario = generate_scenario(&params).expect("feasible params");
    scenario.validate().expect("generated scenarios always validate");

    println!("name: {}", scenario.name);
    println!("bounds: {:.1} x {:.1} m", scenario.bounds_m[0], scenario.bounds_m[1]);
    for room in &scenario.rooms {
        println!(
            "room {} {:16} {:4.1} x {:.1} m",
            room.id,
            room.label,
            room.rect.width(),
            room.rect.height()
        );
    }
    for door in &scenario.doors {
        println!(
            "door {} connects rooms {} and {} at ({:.2}, {:.2})",
            door.id, door.connects[0], door.connects[1], door.position.x, door.position.y
        );
    }
    for task in &scenario.tasks {
        println!("task: {}", serde_json::to_string(task).unwrap());
    }

    let out = std::env::temp_dir().join("hiernav_world.svg");
    std::fs::write(&out, render_svg(&scenario, &SvgScene::default())).unwrap();
    println!("floor plan written to {}", out.display());
}
