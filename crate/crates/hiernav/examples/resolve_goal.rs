//! Resolve text, image, and position instructions to goal coordinates by
//! similarity search over the synthetic semantic field.

use hiernav::field::SemanticField;
use hiernav::grid::rasterize;
use hiernav::planner::global::{resolve_goal, sample_free_points, snap_goal};
use hiernav::scenario::{load_scenario, Instruction};
use hiernav::topo::segment_regions;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/fixture3r.json");
    let scenario = load_scenario(path).unwrap();
    let grid = rasterize(&scenario, false);
    let labeling = segment_regions(&grid, &scenario.doors, &scenario.rooms);
    let field = SemanticField::from_scenario(&scenario, 64, 0);
    let samples = sample_free_points(&grid, 4.0, 0).unwrap();
    println!("{} stratified free-space samples", samples.points.len());

    for instr in [
        Instruction::Text { target_label: "chair".into(), region_label: Some("kitchen".into()) },
        Instruction::Text { target_label: "chair".into(), region_label: None },
        Instruction::Image { embedding_seed: "chair_1".into() },
        Instruction::Position { position: [10.0, 2.0].into() },
        Instruction::Text { target_label: "piano".into(), region_label: None },
    ] {
        let constraint = match &instr {
            Instruction::Text { region_label: Some(r), .. } => Some(labeling.region_by_label(r)),
            _ => None,
        };
        print!("{:60} -> ", serde_json::to_string(&instr).unwrap());
        match resolve_goal(&instr, &field, &samples, &labeling, constraint.as_deref()) {
            Ok(p) => {
                let snapped = snap_goal(&grid, p).unwrap();
                println!("({:.2}, {:.2})", snapped.x, snapped.y);
            }
            Err(e) => println!("{e}"),
        }
    }
}
