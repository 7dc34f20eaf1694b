//! Drives the `tutorlink` binary as a user would.

mod common;

use std::io::{Read, Write};
use std::net::TcpStream;
use std::time::Duration;

use common::{bin, bot, code, fixture, Server};
use tutorlink_core::protocol::{ControlFrame, Envelope, Payload, Sender, PROTOCOL_VERSION};

#[test]
fn session_with_bots_replays_and_exports() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path());

    let teacher = bot(&server.native, &fixture("bots/teacher.json"), &["--role", "console"])
        .spawn()
        .unwrap();
    let student = bot(&server.native, &fixture("bots/student.json"), &["--expect-rejects"])
        .output()
        .unwrap();
    assert_eq!(code(&student), 0, "{}", String::from_utf8_lossy(&student.stderr));
    assert_eq!(teacher.wait_with_output().unwrap().status.code(), Some(0));
    let console = bot(&server.native, &fixture("bots/console.json"), &["--role", "console"])
        .output()
        .unwrap();
    assert_eq!(code(&console), 0, "{}", String::from_utf8_lossy(&console.stderr));

    let log = server.log.clone();
    assert_eq!(server.interrupt(), 0);
    let text = std::fs::read_to_string(&log).unwrap();
    assert!(text.lines().last().unwrap().starts_with("{\"footer\""));

    let replay = bin().arg("replay").arg(&log).output().unwrap();
    assert_eq!(code(&replay), 0, "{}", String::from_utf8_lossy(&replay.stderr));
    let digest = String::from_utf8(replay.stdout).unwrap();
    assert_eq!(digest.trim().len(), 64);
    assert!(text.contains(digest.trim()));

    let export = |what: &str| -> serde_json::Value {
        let out = bin().args(["export", "--what", what]).arg(&log).output().unwrap();
        assert_eq!(code(&out), 0);
        serde_json::from_slice(&out.stdout).unwrap()
    };
    let annotations = export("annotations");
    let labels = annotations["labels"].as_array().unwrap();
    assert!(labels.iter().any(|l| l["headline"] == "Foramen ovale (V3)"), "{annotations}");
    let trajectory = export("trajectory");
    let points = trajectory.as_array().unwrap();
    assert!(points.iter().any(|p| p["kind"] == "RepositionCommand"));
    assert!(points.iter().any(|p| p["kind"] == "TeleportCommit"));
}

#[test]
fn tampered_log_fails_replay() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path());
    let out = bot(&server.native, &fixture("bots/console.json"), &["--role", "console", "--expect-rejects"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let log = server.log.clone();
    assert_eq!(server.interrupt(), 0);
    let text = std::fs::read_to_string(&log).unwrap();

    let tampered = dir.path().join("tampered.jsonl");
    let footer_at = text.rfind("\"digest\":\"").unwrap() + 10;
    let mut bytes = text.into_bytes();
    bytes[footer_at] = if bytes[footer_at] == b'0' { b'1' } else { b'0' };
    std::fs::write(&tampered, &bytes).unwrap();
    assert_eq!(code(&bin().arg("replay").arg(&tampered).output().unwrap()), 1);

    let corrupt = dir.path().join("corrupt.jsonl");
    std::fs::write(&corrupt, "{\"header\"\n").unwrap();
    let out = bin().arg("replay").arg(&corrupt).output().unwrap();
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    assert_eq!(code(&bin().args(["export", "--what", "trajectory"]).arg(&corrupt).output().unwrap()), 1);
}

#[test]
fn rejected_events_exit_1_unless_expected() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("forbidden.json");
    std::fs::write(
        &script,
        r#"[{"t_ms": 0, "event": {"kind": "LandmarkPlace", "position": {"x": 1.5, "y": 0.0, "z": 0.5}}}]"#,
    )
    .unwrap();
    let server = Server::start(dir.path());
    assert_eq!(code(&bot(&server.native, &script, &[]).output().unwrap()), 1);
    assert_eq!(code(&bot(&server.native, &script, &["--expect-rejects"]).output().unwrap()), 0);
}

#[test]
fn config_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"port": "many"}"#).unwrap();
    for config in [bad, dir.path().join("missing.json")] {
        let out = bin().args(["serve", "--config"]).arg(&config).output().unwrap();
        assert_eq!(code(&out), 3);
    }
    let missing_mesh = dir.path().join("mesh.json");
    std::fs::write(&missing_mesh, r#"{"scene": {"mesh": "nope.obj", "metadata": "nope.json"}}"#).unwrap();
    assert_eq!(code(&bin().args(["serve", "--config"]).arg(&missing_mesh).output().unwrap()), 3);
    assert_eq!(code(&bin().args(["serve", "--bogus"]).output().unwrap()), 3);
    let out = bin()
        .args(["bot", "127.0.0.1:1", "--script"])
        .arg(dir.path().join("missing.json"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
}

#[test]
fn unreachable_host_exits_2() {
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let out = bot(&format!("127.0.0.1:{port}"), &fixture("bots/console.json"), &[]).output().unwrap();
    assert_eq!(code(&out), 2);

    let taken = std::net::TcpListener::bind("0.0.0.0:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["serve", "--config"])
        .arg(fixture("server.json"))
        .args(["--port", &port, "--ws-port", "0", "--log"])
        .arg(dir.path().join("s.jsonl"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn websocket_endpoint_and_scene_asset() {
    let dir = tempfile::tempdir().unwrap();
    let server = Server::start(dir.path());

    let mut http = TcpStream::connect(&server.ws).unwrap();
    http.set_read_timeout(Some(Duration::from_secs(5))).unwrap();
    http.write_all(b"GET /scene HTTP/1.1\r\nHost: localhost\r\n\r\n").unwrap();
    let mut response = String::new();
    http.read_to_string(&mut response).unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    let body = &response[response.find("\r\n\r\n").unwrap() + 4..];
    let asset: serde_json::Value = serde_json::from_str(body).unwrap();
    assert!(asset["mesh_obj"].as_str().unwrap().contains("o cranium"));
    assert!(asset["metadata"]["canalis_opticus"].is_object());

    let (mut ws, _) = tungstenite::connect(format!("ws://{}/", server.ws)).unwrap();
    let hello = Envelope::control(1, Sender::Console, ControlFrame::Hello { version: PROTOCOL_VERSION.into() });
    ws.send(tungstenite::Message::text(hello.to_json())).unwrap();
    let welcome = loop {
        match ws.read().unwrap() {
            tungstenite::Message::Text(t) => break Envelope::from_json(t.as_bytes()).unwrap(),
            _ => continue,
        }
    };
    assert!(matches!(welcome.payload, Payload::Control(ControlFrame::Welcome { horizon: 0, .. })));
}
