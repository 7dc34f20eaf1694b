//! The `tutorlink` command-line tool: host a session, drive it with scripted
//! bots, replay logs and export their contents.

#![allow(clippy::large_enum_variant)]

pub mod bot;
pub mod config;
pub mod serve;

use std::io::Write;
use std::path::Path;

use tutorlink_core::net_harness::{
    export_annotations, export_trajectory, replay_log, HarnessError, SessionLog,
};

/// Process exit codes. These are a stable contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCode {
    Ok = 0,
    /// Rejections, digest mismatches, corrupt logs.
    Semantic = 1,
    /// Unreachable or unbindable sockets.
    Connectivity = 2,
    /// Unreadable or invalid configuration.
    Config = 3,
}

impl From<ExitCode> for std::process::ExitCode {
    fn from(code: ExitCode) -> Self {
        std::process::ExitCode::from(code as u8)
    }
}

/// Prints to stdout, treating a closed pipe as success.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}").and_then(|_| out.flush());
}

fn load_log(path: &Path) -> Result<(SessionLog, Option<tutorlink_core::session_state::ReducerContext>), HarnessError> {
    let log = SessionLog::read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let ctx = log.context(base)?;
    Ok((log, ctx))
}

/// Prints the replayed digest. Exit 0 only when it matches the footer.
pub fn cmd_replay(path: &Path) -> ExitCode {
    let replayed = load_log(path).and_then(|(log, ctx)| replay_log(&log, ctx.as_ref()));
    match replayed {
        Ok(r) => {
            emit(&r.digest);
            if r.matches_footer() {
                ExitCode::Ok
            } else {
                match &r.footer {
                    Some(f) => eprintln!(
                        "error: footer records {} after {} events, replay gives {} after {}",
                        f.digest, f.events, r.digest, r.events
                    ),
                    None => eprintln!("error: log has no footer"),
                }
                ExitCode::Semantic
            }
        }
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            ExitCode::Semantic
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ExportKind {
    Annotations,
    Trajectory,
}

/// Exports the final annotations or the student's platform trajectory as JSON.
pub fn export_json(path: &Path, what: ExportKind) -> Result<String, HarnessError> {
    let (log, ctx) = load_log(path)?;
    let value = match what {
        ExportKind::Annotations => {
            let state = replay_log(&log, ctx.as_ref())?.state;
            serde_json::to_string_pretty(&export_annotations(&state))
        }
        ExportKind::Trajectory => {
            serde_json::to_string_pretty(&export_trajectory(&log, ctx.as_ref())?)
        }
    };
    Ok(value.expect("export serializes"))
}

pub fn cmd_export(path: &Path, what: ExportKind) -> ExitCode {
    match export_json(path, what) {
        Ok(json) => {
            emit(&json);
            ExitCode::Ok
        }
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            ExitCode::Semantic
        }
    }
}

/// Logging to stderr, filtered by `TUTORLINK_LOG_LEVEL` (default `info`).
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or("TUTORLINK_LOG_LEVEL", "info");
    let _ = env_logger::Builder::from_env(env).format_timestamp_millis().try_init();
}
