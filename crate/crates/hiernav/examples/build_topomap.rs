//! Segment the fixture floor plan into regions and build the topometric
//! graph of region and entrance vertices.

use hiernav::grid::rasterize;
use hiernav::scenario::load_scenario;
use hiernav::topo::{build_topo_graph, segment_regions, serialize_graph, VertexKind};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/fixture3r.json");
    let scenario = load_scenario(path).unwrap();
    let grid = rasterize(&scenario, false);

    let labeling = segment_regions(&grid, &scenario.doors, &scenario.rooms);
    println!("{} regions segmented from the occupancy grid", labeling.n_regions());

    let graph = build_topo_graph(&labeling, &scenario.doors);
    graph.check_invariants().expect("bipartite graph with entrance degree 2");

    for v in &graph.vertices {
        match &v.kind {
            VertexKind::Region { label, centroid } => {
                println!("vertex {:2}  region   {:12} centroid ({:.2}, {:.2})", v.id, label, centroid.x, centroid.y)
            }
            VertexKind::Entrance { position, connects } => println!(
                "vertex {:2}  entrance at ({:.2}, {:.2}) joining regions {:?}",
                v.id, position.x, position.y, connects
            ),
        }
    }
    for e in &graph.edges {
        println!("edge {} -- {}  weight {:.2} m", e.a, e.b, e.weight_m);
    }

    let json = serialize_graph(&graph);
    println!("serialized graph: {} bytes, connected: {}", json.len(), graph.is_connected());
}
