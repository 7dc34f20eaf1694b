//! Helpers shared by the integration and acceptance targets.
#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tutorlink"));
    c.env("TUTORLINK_LOG_LEVEL", "warn");
    c
}

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub struct Server {
    pub child: Child,
    pub native: String,
    pub ws: String,
    pub log: PathBuf,
}

impl Server {
    pub fn start(dir: &Path) -> Server {
        let log = dir.join("session.jsonl");
        let mut child = bin()
            .args(["serve", "--config"])
            .arg(fixture("server.json"))
            .args(["--port", "0", "--ws-port", "0", "--log"])
            .arg(&log)
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        let field = |key: &str| {
            let port = line
                .split_whitespace()
                .find_map(|w| w.strip_prefix(key))
                .unwrap_or_else(|| panic!("no {key} in {line:?}"))
                .rsplit(':')
                .next()
                .unwrap()
                .to_string();
            format!("127.0.0.1:{port}")
        };
        Server {
            native: field("native="),
            ws: field("ws="),
            log,
            child,
        }
    }

    /// Stops the server the way an operator does, with SIGINT.
    pub fn interrupt(mut self) -> i32 {
        let status = Command::new("kill")
            .args(["-INT", &self.child.id().to_string()])
            .status()
            .unwrap();
        assert!(status.success());
        self.child.wait().unwrap().code().unwrap()
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
    }
}

pub fn bot(addr: &str, script: &Path, extra: &[&str]) -> Command {
    let mut c = bin();
    c.args(["bot", addr, "--script"])
        .arg(script)
        .arg("--config")
        .arg(fixture("server.json"))
        .args(["--time-scale", "0.3"])
        .args(extra);
    c
}
