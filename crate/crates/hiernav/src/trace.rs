//! Episode traces as JSONL: one JSON object per line, written to a file,
//! captured in memory for assertions, or discarded.

use crate::geometry::{Point, Pose, Rect};
use serde_json::json;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

enum Sink {
    File(BufWriter<File>),
    Memory(Vec<String>),
    Null,
}

pub struct TraceWriter {
    sink: Sink,
    /// Pose events are by far the densest stream; captures used only for
    /// event-order assertions can turn them off.
    pub include_poses: bool,
}

impl TraceWriter {
    pub fn to_file(path: &Path) -> std::io::Result<Self> {
        Ok(Self {
            sink: Sink::File(BufWriter::new(File::create(path)?)),
            include_poses: true,
        })
    }

    pub fn capture() -> Self {
        Self { sink: Sink::Memory(Vec::new()), include_poses: true }
    }

    pub fn capture_events_only() -> Self {
        Self { sink: Sink::Memory(Vec::new()), include_poses: false }
    }

    pub fn null() -> Self {
        Self { sink: Sink::Null, include_poses: false }
    }

    /// Captured lines; empty unless this writer is a capture.
    pub fn lines(&self) -> &[String] {
        match &self.sink {
            Sink::Memory(v) => v,
            _ => &[],
        }
    }

    /// Parsed captured events, in emission order.
    pub fn events(&self) -> Vec<serde_json::Value> {
        self.lines()
            .iter()
            .filter_map(|l| serde_json::from_str(l).ok())
            .collect()
    }

    fn emit(&mut self, v: serde_json::Value) {
        let line = v.to_string();
        match &mut self.sink {
            Sink::File(f) => {
                let _ = writeln!(f, "{line}");
            }
            Sink::Memory(m) => m.push(line),
            Sink::Null => {}
        }
    }

    pub fn pose(&mut self, t_s: f64, pose: Pose) {
        if self.include_poses {
            self.emit(json!({
                "t": t_s,
                "event": "pose",
                "position": [pose.position.x, pose.position.y],
                "yaw": pose.yaw_rad,
            }));
        }
    }

    pub fn collision(&mut self, t_s: f64) {
        self.emit(json!({"t": t_s, "event": "collision"}));
    }

    pub fn obstacle_spawn(&mut self, t_s: f64, rect: Rect) {
        self.emit(json!({
            "t": t_s,
            "event": "obstacle_spawn",
            "rect": [rect.x0, rect.y0, rect.x1, rect.y1],
        }));
    }

    pub fn global_plan(&mut self, waypoints: &[Point], cost_m: f64) {
        let w: Vec<[f64; 2]> = waypoints.iter().map(|p| [p.x, p.y]).collect();
        self.emit(json!({"event": "global_plan", "waypoints": w, "cost_m": cost_m}));
    }

    pub fn local_plan(&mut self, segment: usize, waypoints: &[Point]) {
        let w: Vec<[f64; 2]> = waypoints.iter().map(|p| [p.x, p.y]).collect();
        self.emit(json!({"event": "local_plan", "segment": segment, "waypoints": w}));
    }

    pub fn conflict(&mut self, cells: usize) {
        self.emit(json!({"event": "conflict", "cells": cells}));
    }

    pub fn replan_local(&mut self, segment: usize) {
        self.emit(json!({"event": "replan_local", "segment": segment}));
    }

    /// Escalation trigger: a local plan attempt found no path.
    pub fn local_blocked(&mut self, segment: usize) {
        self.emit(json!({"event": "local_blocked", "segment": segment}));
    }

    /// Escalation trigger: the per-segment clock ran out.
    pub fn segment_timeout(&mut self, segment: usize, elapsed_s: f64) {
        self.emit(json!({
            "event": "segment_timeout",
            "segment": segment,
            "elapsed_s": elapsed_s,
        }));
    }

    /// Escalation trigger: an entrance vertex was visited too often.
    pub fn visit_limit(&mut self, vertex: u32, count: u32) {
        self.emit(json!({"event": "visit_limit", "vertex": vertex, "count": count}));
    }

    pub fn replan_global(&mut self, penalized: Option<u32>) {
        self.emit(json!({"event": "replan_global", "penalized": penalized}));
    }

    pub fn backend_fallback(&mut self, reason: &str) {
        self.emit(json!({"event": "backend_fallback", "reason": reason}));
    }

    pub fn terminate(&mut self, code: &str, success: bool) {
        self.emit(json!({"event": "terminate", "code": code, "success": success}));
        if let Sink::File(f) = &mut self.sink {
            let _ = f.flush();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn event_shapes_match_line_protocol() {
        let mut w = TraceWriter::capture();
        w.pose(0.2, Pose::xy(1.0, 2.0, 0.5));
        w.collision(0.4);
        w.obstacle_spawn(0.6, Rect::new(1.0, 1.0, 2.0, 2.0));
        w.global_plan(&[Point::new(4.0, 2.0)], 9.0);
        w.local_plan(0, &[Point::new(1.5, 2.0)]);
        w.conflict(7);
        w.replan_local(0);
        w.replan_global(Some(3));
        w.backend_fallback("timeout");
        w.terminate("Arrived", true);

        let ev = w.events();
        assert_eq!(ev.len(), 10);
        assert_eq!(ev[0]["event"], "pose");
        assert_eq!(ev[0]["t"], 0.2);
        assert_eq!(ev[0]["position"][0], 1.0);
        assert_eq!(ev[1]["event"], "collision");
        assert_eq!(ev[2]["rect"][3], 2.0);
        assert_eq!(ev[3]["event"], "global_plan");
        assert_eq!(ev[3]["waypoints"][0][0], 4.0);
        assert_eq!(ev[3]["cost_m"], 9.0);
        assert_eq!(ev[4]["segment"], 0);
        assert_eq!(ev[5]["cells"], 7);
        assert_eq!(ev[9]["event"], "terminate");
        assert_eq!(ev[9]["code"], "Arrived");
        assert_eq!(ev[9]["success"], true);
        // every line parses standalone
        for l in w.lines() {
            assert!(serde_json::from_str::<serde_json::Value>(l).is_ok());
        }
    }

    #[test]
    fn pose_suppression() {
        let mut w = TraceWriter::capture_events_only();
        w.pose(0.1, Pose::xy(0.0, 0.0, 0.0));
        w.conflict(1);
        assert_eq!(w.events().len(), 1);
    }

    #[test]
    fn file_sink_round_trip() {
        let dir = std::env::temp_dir().join("hiernav_trace_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("t.jsonl");
        let mut w = TraceWriter::to_file(&path).unwrap();
        w.global_plan(&[], 0.0);
        w.terminate("NotFound", false);
        drop(w);
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].contains("\"code\":\"NotFound\""));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
