//! Drive an episode through the external decision-service protocol. A mock
//! service runs on a local TCP port: it deserializes the status block from
//! each request line and answers with the same workflow policy the built-in
//! backend uses, so the episode should match a scripted run exactly.

use hiernav::scenario::load_scenario;
use hiernav::trace::TraceWriter;
use hiernav::{
    run_episode, scripted_action, AgentStatus, RunConfig, ScriptedBackend, ServiceBackend,
};
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;

fn serve(listener: TcpListener) {
    for stream in listener.incoming() {
        let Ok(stream) = stream else { return };
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut stream = stream;
        let mut line = String::new();
        loop {
            line.clear();
            match reader.read_line(&mut line) {
                Ok(0) | Err(_) => return,
                Ok(_) => {}
            }
            let request: serde_json::Value = serde_json::from_str(&line).unwrap();
            let status: AgentStatus = serde_json::from_value(request["S"].clone()).unwrap();
            let action = scripted_action(&status);
            let reply = serde_json::json!({ "A": action.name() });
            writeln!(stream, "{reply}").unwrap();
        }
    }
}

fn main() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    std::thread::spawn(move || serve(listener));
    println!("mock decision service listening on {addr}");

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/fixture3r.json");
    let scenario = load_scenario(path).unwrap();
    let cfg = RunConfig::default();

    let mut service = ServiceBackend::new(&addr);
    let mut trace = TraceWriter::null();
    let remote = run_episode(&scenario, 0, &cfg, &mut service, &mut trace).unwrap();
    println!(
        "service-driven episode: {:?}, {:.3} m",
        remote.termination, remote.path_length_m
    );

    let mut scripted = ScriptedBackend::default();
    let mut trace = TraceWriter::null();
    let local = run_episode(&scenario, 0, &cfg, &mut scripted, &mut trace).unwrap();
    println!(
        "scripted episode:       {:?}, {:.3} m",
        local.termination, local.path_length_m
    );

    assert_eq!(remote.termination, local.termination);
    assert_eq!(remote.path_length_m, local.path_length_m);
    assert_eq!(remote.trajectory.len(), local.trajectory.len());
    println!("both backends produced identical episodes");
}
