//! Dependency-free top-down SVG rendering of scenarios, plans, and runs.

use crate::geometry::{Point, Rect};
use crate::scenario::{shared_boundary, Scenario, SharedBoundary};
use crate::topo::{TopoGraph, VertexKind};
use std::fmt::Write;

const PX_PER_M: f64 = 60.0;
const PAD_PX: f64 = 24.0;

/// What to draw: the scenario is mandatory, everything else optional.
#[derive(Default)]
pub struct SvgScene<'a> {
    pub graph: Option<&'a TopoGraph>,
    pub global_waypoints: &'a [Point],
    pub trajectory: &'a [Point],
}

struct Frame {
    h_m: f64,
}

impl Frame {
    fn x(&self, x_m: f64) -> f64 {
        PAD_PX + x_m * PX_PER_M
    }

    // SVG y grows downward; world y grows upward
    fn y(&self, y_m: f64) -> f64 {
        PAD_PX + (self.h_m - y_m) * PX_PER_M
    }

    fn rect(&self, out: &mut String, r: &Rect, class: &str, extra: &str) {
        let _ = write!(
            out,
            "<rect class=\"{class}\" x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\"{extra}/>\n",
            self.x(r.x0),
            self.y(r.y1),
            r.width() * PX_PER_M,
            r.height() * PX_PER_M,
        );
    }

    fn polyline(&self, out: &mut String, pts: &[Point], class: &str) {
        if pts.len() < 2 {
            return;
        }
        let coords: Vec<String> =
            pts.iter().map(|p| format!("{:.1},{:.1}", self.x(p.x), self.y(p.y))).collect();
        let _ = write!(out, "<polyline class=\"{class}\" points=\"{}\"/>\n", coords.join(" "));
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render a scenario (plus optional graph, plan, and executed trajectory)
/// as a standalone SVG document.
pub fn render_svg(scenario: &Scenario, scene: &SvgScene) -> String {
    let f = Frame { h_m: scenario.bounds_m[1] };
    let w_px = scenario.bounds_m[0] * PX_PER_M + 2.0 * PAD_PX;
    let h_px = scenario.bounds_m[1] * PX_PER_M + 2.0 * PAD_PX;
    let mut out = String::new();
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w_px:.0}\" height=\"{h_px:.0}\" \
         viewBox=\"0 0 {w_px:.0} {h_px:.0}\">\n"
    );
    out.push_str(concat!(
        "<style>",
        ".room{fill:#f7f4ee;stroke:#4a4a4a;stroke-width:12}",
        ".gap{stroke:#f7f4ee;stroke-width:14;stroke-linecap:butt}",
        ".object{fill:#cfe0f2;stroke:#638dba;stroke-width:1.5}",
        ".obstacle{fill:#e8bcbc;stroke:#aa4f4f;stroke-width:1.5}",
        ".edge{stroke:#9a9a9a;stroke-width:1.5;fill:none}",
        ".region{fill:#3e8e5a}",
        ".entrance{fill:#d9822b}",
        ".plan{fill:none;stroke:#d9822b;stroke-width:2.5;stroke-dasharray:7 5}",
        ".traj{fill:none;stroke:#2f6bb0;stroke-width:2.5}",
        ".start{fill:#2f6bb0}",
        ".label{font:11px sans-serif;fill:#333;text-anchor:middle}",
        "</style>\n",
    ));
    let _ = write!(out, "<rect width=\"{w_px:.0}\" height=\"{h_px:.0}\" fill=\"#ffffff\"/>\n");

    for room in &scenario.rooms {
        f.rect(&mut out, &room.rect, "room", "");
        let c = room.rect.center();
        let _ = write!(
            out,
            "<text class=\"label\" x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
            f.x(c.x),
            f.y(room.rect.y1) + 16.0,
            esc(&room.label),
        );
    }

    // door gaps punch through the wall strokes
    for door in &scenario.doors {
        let (Some(a), Some(b)) = (
            scenario.room(door.connects[0]).map(|r| r.rect),
            scenario.room(door.connects[1]).map(|r| r.rect),
        ) else {
            continue;
        };
        let half = door.width_m / 2.0;
        let (p0, p1) = match shared_boundary(&a, &b) {
            Some(SharedBoundary::Vertical { line, .. }) => (
                Point::new(line, door.position.y - half),
                Point::new(line, door.position.y + half),
            ),
            Some(SharedBoundary::Horizontal { line, .. }) => (
                Point::new(door.position.x - half, line),
                Point::new(door.position.x + half, line),
            ),
            None => continue,
        };
        let _ = write!(
            out,
            "<line class=\"gap\" x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\"/>\n",
            f.x(p0.x),
            f.y(p0.y),
            f.x(p1.x),
            f.y(p1.y),
        );
    }

    for obj in &scenario.objects {
        f.rect(&mut out, &obj.rect, "object", "");
        let c = obj.rect.center();
        let _ = write!(
            out,
            "<text class=\"label\" x=\"{:.1}\" y=\"{:.1}\">{}</text>\n",
            f.x(c.x),
            f.y(c.y) + 4.0,
            esc(&obj.label),
        );
    }

    for d in &scenario.dynamic_obstacles {
        let dash = if d.spawn_after_mapping { " stroke-dasharray=\"5 4\"" } else { "" };
        f.rect(&mut out, &d.rect, "obstacle", dash);
    }

    if let Some(g) = scene.graph {
        let pos = |id: u32| {
            g.vertex(id).map(|v| match &v.kind {
                VertexKind::Region { centroid, .. } => *centroid,
                VertexKind::Entrance { position, .. } => *position,
            })
        };
        for e in &g.edges {
            let (Some(a), Some(b)) = (pos(e.a), pos(e.b)) else { continue };
            let _ = write!(
                out,
                "<line class=\"edge\" x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\"/>\n",
                f.x(a.x),
                f.y(a.y),
                f.x(b.x),
                f.y(b.y),
            );
        }
        for v in &g.vertices {
            match &v.kind {
                VertexKind::Region { centroid, .. } => {
                    let _ = write!(
                        out,
                        "<circle class=\"region\" cx=\"{:.1}\" cy=\"{:.1}\" r=\"5\"/>\n",
                        f.x(centroid.x),
                        f.y(centroid.y),
                    );
                }
                VertexKind::Entrance { position, .. } => {
                    let _ = write!(
                        out,
                        "<rect class=\"entrance\" x=\"{:.1}\" y=\"{:.1}\" width=\"8\" height=\"8\" \
                         transform=\"rotate(45 {:.1} {:.1})\"/>\n",
                        f.x(position.x) - 4.0,
                        f.y(position.y) - 4.0,
                        f.x(position.x),
                        f.y(position.y),
                    );
                }
            }
        }
    }

    f.polyline(&mut out, scene.global_waypoints, "plan");
    for p in scene.global_waypoints {
        let _ = write!(
            out,
            "<circle class=\"entrance\" cx=\"{:.1}\" cy=\"{:.1}\" r=\"3.5\"/>\n",
            f.x(p.x),
            f.y(p.y),
        );
    }

    f.polyline(&mut out, scene.trajectory, "traj");

    let s = scenario.start;
    let tip = s.position.polar(s.yaw_rad, 0.35);
    let _ = write!(
        out,
        "<circle class=\"start\" cx=\"{:.1}\" cy=\"{:.1}\" r=\"5\"/>\n\
         <line class=\"traj\" x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\"/>\n",
        f.x(s.position.x),
        f.y(s.position.y),
        f.x(s.position.x),
        f.y(s.position.y),
        f.x(tip.x),
        f.y(tip.y),
    );

    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose;
    use crate::grid::rasterize;
    use crate::scenario::{Door, Instruction, Room};
    use crate::topo::{build_topo_graph, segment_regions};

    fn fixture() -> Scenario {
        Scenario {
            name: "fixture3r".into(),
            cell_size_m: 0.1,
            bounds_m: [12.0, 4.0],
            rooms: vec![
                Room { id: 0, label: "living room".into(), rect: Rect::new(0.0, 0.0, 4.0, 4.0) },
                Room { id: 1, label: "hall".into(), rect: Rect::new(4.0, 0.0, 8.0, 4.0) },
                Room { id: 2, label: "kitchen".into(), rect: Rect::new(8.0, 0.0, 12.0, 4.0) },
            ],
            doors: vec![
                Door {
                    id: "d0".into(),
                    connects: [0, 1],
                    position: Point::new(4.0, 2.0),
                    width_m: 0.9,
                },
                Door {
                    id: "d1".into(),
                    connects: [1, 2],
                    position: Point::new(8.0, 2.0),
                    width_m: 0.9,
                },
            ],
            objects: vec![],
            dynamic_obstacles: vec![],
            start: Pose::xy(1.0, 2.0, 0.0),
            tasks: vec![Instruction::Position { position: Point::new(10.0, 2.0) }],
        }
    }

    #[test]
    fn document_shape_and_layers() {
        let s = fixture();
        let grid = rasterize(&s, false);
        let labeling = segment_regions(&grid, &s.doors, &s.rooms);
        let graph = build_topo_graph(&labeling, &s.doors);
        let traj = [Point::new(1.0, 2.0), Point::new(4.0, 2.0), Point::new(10.0, 2.0)];
        let scene = SvgScene {
            graph: Some(&graph),
            global_waypoints: &[Point::new(4.0, 2.0), Point::new(8.0, 2.0)],
            trajectory: &traj,
        };
        let svg = render_svg(&s, &scene);
        assert!(svg.starts_with("<svg "));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("class=\"room\"").count(), 3);
        assert_eq!(svg.matches("class=\"gap\"").count(), 2);
        assert_eq!(svg.matches("class=\"traj\"").count(), 2, "trajectory polyline + heading tick");
        assert_eq!(svg.matches("<polyline class=\"traj\"").count(), 1);
        assert_eq!(svg.matches("class=\"region\"").count(), 3);
        assert_eq!(svg.matches("class=\"entrance\"").count(), 2 + 2);
    }

    #[test]
    fn renders_without_optional_layers_and_is_deterministic() {
        let s = fixture();
        let a = render_svg(&s, &SvgScene::default());
        let b = render_svg(&s, &SvgScene::default());
        assert_eq!(a, b);
        assert_eq!(a.matches("<polyline").count(), 0);
    }

    #[test]
    fn labels_are_escaped() {
        let mut s = fixture();
        s.rooms[0].label = "a<b&c".into();
        let svg = render_svg(&s, &SvgScene::default());
        assert!(svg.contains("a&lt;b&amp;c"));
        assert!(!svg.contains("a<b&c"));
    }
}
