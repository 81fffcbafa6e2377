//! Line-delimited JSON protocol to an external decision service: one
//! request object per line out, one `{"A":"<action>"}` line back.

use super::policy::{Action, BackendDecision, DecisionBackend};
use super::AgentContext;
use serde_json::json;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::time::Duration;

pub const DEFAULT_BACKEND_TIMEOUT: Duration = Duration::from_secs(10);

/// Context as a single-line JSON request record.
pub fn encode_context(ctx: &AgentContext) -> String {
    let map = ctx.map.as_ref().map(|m| {
        json!({"graph": m.graph, "labels": m.labels})
    });
    json!({
        "B": ctx.background,
        "I": ctx.instruction,
        "M": map,
        "P": ctx.plan_history,
        "T": ctx.trajectory.iter().rev().take(50).rev().collect::<Vec<_>>(),
        "S": ctx.status,
        "O": ctx.allowed_actions,
    })
    .to_string()
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("unknown action {0:?}")]
    UnknownAction(String),
}

/// Parse a `{"A":"<action>"}` response line.
pub fn decode_action(line: &str) -> Result<Action, BackendError> {
    let v: serde_json::Value = serde_json::from_str(line.trim())
        .map_err(|e| BackendError::Malformed(e.to_string()))?;
    let name = v
        .get("A")
        .and_then(|a| a.as_str())
        .ok_or_else(|| BackendError::Malformed("missing \"A\" key".into()))?;
    name.parse()
        .map_err(|()| BackendError::UnknownAction(name.to_string()))
}

/// TCP client for an external decision service. Every failure mode
/// (connect, write, timeout, malformed or unknown reply) degrades to a
/// scripted-policy fallback rather than aborting the episode.
pub struct ServiceBackend {
    addr: String,
    timeout: Duration,
    conn: Option<(TcpStream, BufReader<TcpStream>)>,
    dead: bool,
}

impl ServiceBackend {
    pub fn new(addr: &str) -> Self {
        Self::with_timeout(addr, DEFAULT_BACKEND_TIMEOUT)
    }

    pub fn with_timeout(addr: &str, timeout: Duration) -> Self {
        Self { addr: addr.to_string(), timeout, conn: None, dead: false }
    }

    fn ensure_conn(&mut self) -> std::io::Result<&mut (TcpStream, BufReader<TcpStream>)> {
        if self.conn.is_none() {
            let stream = TcpStream::connect(&self.addr)?;
            stream.set_read_timeout(Some(self.timeout))?;
            stream.set_write_timeout(Some(self.timeout))?;
            stream.set_nodelay(true)?;
            let reader = BufReader::new(stream.try_clone()?);
            self.conn = Some((stream, reader));
        }
        Ok(self.conn.as_mut().unwrap())
    }

    fn round_trip(&mut self, request: &str) -> Result<Action, String> {
        let (stream, reader) = self.ensure_conn().map_err(|e| format!("connect: {e}"))?;
        stream
            .write_all(request.as_bytes())
            .and_then(|()| stream.write_all(b"\n"))
            .map_err(|e| format!("send: {e}"))?;
        let mut line = String::new();
        let n = reader.read_line(&mut line).map_err(|e| format!("recv: {e}"))?;
        if n == 0 {
            return Err("recv: connection closed".into());
        }
        decode_action(&line).map_err(|e| e.to_string())
    }
}

impl DecisionBackend for ServiceBackend {
    fn decide(&mut self, ctx: &AgentContext) -> BackendDecision {
        if self.dead {
            return BackendDecision::Fallback("backend marked dead".into());
        }
        let request = encode_context(ctx);
        match self.round_trip(&request) {
            Ok(a) => BackendDecision::Action(a),
            Err(reason) => {
                // io-level failures poison the connection; protocol-level
                // ones (unknown action) keep it for the next step
                if reason.starts_with("connect")
                    || reason.starts_with("send")
                    || reason.starts_with("recv")
                {
                    self.conn = None;
                    self.dead = true;
                }
                BackendDecision::Fallback(reason)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::AgentStatus;
    use crate::scenario::Instruction;
    use std::net::TcpListener;

    fn ctx() -> AgentContext {
        AgentContext {
            background: "test".into(),
            instruction: Instruction::Text {
                target_label: "chair".into(),
                region_label: None,
            },
            map: None,
            plan_history: vec![],
            trajectory: vec![],
            status: AgentStatus::default(),
            allowed_actions: Action::ALL.iter().map(|a| a.name().to_string()).collect(),
            last_action: None,
        }
    }

    #[test]
    fn decode_round_trip() {
        assert_eq!(decode_action(r#"{"A":"PlanGlobal"}"#).unwrap(), Action::PlanGlobal);
        assert!(matches!(
            decode_action(r#"{"A":"FlyAway"}"#),
            Err(BackendError::UnknownAction(_))
        ));
        assert!(matches!(decode_action("not json"), Err(BackendError::Malformed(_))));
        assert!(matches!(decode_action(r#"{"B":1}"#), Err(BackendError::Malformed(_))));
    }

    #[test]
    fn encode_is_single_line_with_protocol_keys() {
        let line = encode_context(&ctx());
        assert!(!line.contains('\n'));
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        for key in ["B", "I", "M", "P", "T", "S", "O"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["O"].as_array().unwrap().len(), 9);
        assert_eq!(v["I"]["kind"], "text");
    }

    #[test]
    fn trajectory_truncates_to_last_50() {
        use crate::agent::TimedPose;
        use crate::geometry::Point;
        let mut c = ctx();
        for i in 0..130 {
            c.trajectory.push(TimedPose {
                t_s: i as f64,
                position: Point::new(i as f64, 0.0),
                yaw_rad: 0.0,
            });
        }
        let v: serde_json::Value = serde_json::from_str(&encode_context(&c)).unwrap();
        let t = v["T"].as_array().unwrap();
        assert_eq!(t.len(), 50);
        assert_eq!(t[0]["t_s"], 80.0);
        assert_eq!(t[49]["t_s"], 129.0);
    }

    #[test]
    fn service_round_trip_and_unknown_action_fallback() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut stream = stream;
            // first reply: fixed action; second: unknown action
            for reply in [r#"{"A":"BuildMap"}"#, r#"{"A":"FlyAway"}"#] {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                assert!(serde_json::from_str::<serde_json::Value>(&line).is_ok());
                stream.write_all(reply.as_bytes()).unwrap();
                stream.write_all(b"\n").unwrap();
            }
        });

        let mut backend = ServiceBackend::with_timeout(&addr.to_string(), Duration::from_secs(2));
        match backend.decide(&ctx()) {
            BackendDecision::Action(a) => assert_eq!(a, Action::BuildMap),
            BackendDecision::Fallback(r) => panic!("unexpected fallback: {r}"),
        }
        match backend.decide(&ctx()) {
            BackendDecision::Fallback(r) => assert!(r.contains("FlyAway"), "{r}"),
            BackendDecision::Action(_) => panic!("unknown action must fall back"),
        }
        // protocol-level failure keeps the connection alive
        assert!(!backend.dead);
        server.join().unwrap();
    }

    #[test]
    fn unreachable_service_falls_back() {
        // a bound-then-dropped listener leaves a port nothing accepts on
        let addr = {
            let l = TcpListener::bind("127.0.0.1:0").unwrap();
            l.local_addr().unwrap()
        };
        let mut backend = ServiceBackend::with_timeout(&addr.to_string(), Duration::from_millis(300));
        match backend.decide(&ctx()) {
            BackendDecision::Fallback(r) => assert!(r.starts_with("connect"), "{r}"),
            BackendDecision::Action(_) => panic!("must fall back"),
        }
        assert!(backend.dead);
        // subsequent calls degrade immediately
        match backend.decide(&ctx()) {
            BackendDecision::Fallback(r) => assert!(r.contains("dead")),
            BackendDecision::Action(_) => panic!(),
        }
    }

    #[test]
    fn silent_service_times_out() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let server = std::thread::spawn(move || {
            // accept and read but never reply
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut line = String::new();
            let _ = reader.read_line(&mut line);
            std::thread::sleep(Duration::from_millis(600));
        });
        let mut backend = ServiceBackend::with_timeout(&addr.to_string(), Duration::from_millis(200));
        match backend.decide(&ctx()) {
            BackendDecision::Fallback(r) => assert!(r.starts_with("recv"), "{r}"),
            BackendDecision::Action(_) => panic!("must fall back on timeout"),
        }
        server.join().unwrap();
    }
}
