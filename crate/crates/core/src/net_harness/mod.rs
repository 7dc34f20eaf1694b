//! Deterministic simulated network, scripted peers, session logs and replay.

mod bots;
mod fuzz;
mod log;
mod sim;

use std::path::PathBuf;

pub use bots::{
    console_bot, fixture_bots, load_script, parse_script, student_bot, teacher_bot, ScriptedBot,
    TimedEvent, FIXTURE_DURATION_MS, FIXTURE_REPOSITION, FIXTURE_TELEPORT,
};
pub use fuzz::random_events;
pub use log::{
    check_reposition_discreteness, export_annotations, export_trajectory, render_log, replay,
    replay_log, AnnotationExport, LogEntry, LogFooter, LogHeader, LogWriter, Replayed,
    SceneSource, SessionLog, TrajectoryPoint,
};
pub use sim::{
    run_sim, ChannelLatency, Interleaving, LatencyStats, PeerReport, RejectionRecord, SimReport,
    SimSchedule,
};

use crate::scene::SceneError;
use crate::session_state::RejectReason;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("line {line}: {message}")]
    CorruptLine { line: usize, message: String },
    #[error("line {line}: logged event rejected on replay: {reason}")]
    Rejected { line: usize, reason: RejectReason },
    #[error("line {line}: reposition not discrete: {message}")]
    Discreteness { line: usize, message: String },
    #[error("scene: {0}")]
    Scene(#[from] SceneError),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::navigation::NavConfig;
    use crate::scene::{AnatomyScene, SceneConfig};
    use crate::session_state::{digest_hex, ReducerContext, SessionState};

    fn ctx() -> ReducerContext {
        ReducerContext::new(
            Arc::new(AnatomyScene::sample(&SceneConfig::default())),
            NavConfig::default(),
        )
    }

    fn header() -> LogHeader {
        LogHeader::new(SceneSource::Sample { config: SceneConfig::default() }, NavConfig::default())
    }

    #[test]
    fn fixture_run_converges_and_replays() {
        let c = ctx();
        let report = run_sim(&SimSchedule::new(42), &fixture_bots(&c.nav), FIXTURE_DURATION_MS, &c).unwrap();
        assert!(report.converged, "{:?}", report.errors);
        assert_eq!(report.fifo_violations, 0);
        assert_eq!(report.peers.len(), 3);
        assert!(report.rejections.iter().any(|r| r.reason == RejectReason::Forbidden));

        let final_state = replay_log(
            &SessionLog {
                header: Some(header()),
                entries: report
                    .log
                    .iter()
                    .enumerate()
                    .map(|(i, e)| LogEntry { line: i + 2, envelope: e.clone() })
                    .collect(),
                footer: None,
            },
            Some(&c),
        )
        .unwrap();
        assert_eq!(final_state.digest, report.peers[0].digest);

        let text = render_log(&header(), &report.log, &final_state.state);
        let log = SessionLog::parse(&text).unwrap();
        let replayed = replay_log(&log, Some(&c)).unwrap();
        assert!(replayed.matches_footer());
        assert_eq!(check_reposition_discreteness(&log, &c, 0.25).unwrap(), 1);
    }

    #[test]
    fn sim_is_deterministic() {
        let c = ctx();
        let mut s = SimSchedule::new(7);
        s.jitter_ms = 150;
        s.duplication = 0.5;
        s.interleaving = Interleaving::Shuffle;
        let bots = fixture_bots(&c.nav);
        let a = run_sim(&s, &bots, FIXTURE_DURATION_MS, &c).unwrap().to_json();
        let b = run_sim(&s, &bots, FIXTURE_DURATION_MS, &c).unwrap().to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_event_run_keeps_initial_digest() {
        let c = ctx();
        let bots = vec![
            ScriptedBot::new(crate::protocol::Sender::StudentClient, vec![]),
            ScriptedBot::new(crate::protocol::Sender::Console, vec![]),
        ];
        let report = run_sim(&SimSchedule::new(1), &bots, 1000, &c).unwrap();
        let initial = digest_hex(&SessionState::default());
        assert!(report.peers.iter().all(|p| p.digest == initial));
    }

    #[test]
    fn tampered_and_corrupt_logs() {
        let c = ctx();
        let report = run_sim(&SimSchedule::new(3), &fixture_bots(&c.nav), FIXTURE_DURATION_MS, &c).unwrap();
        let state = replay_log(
            &SessionLog {
                header: None,
                entries: report.log.iter().map(|e| LogEntry { line: 0, envelope: e.clone() }).collect(),
                footer: None,
            },
            Some(&c),
        )
        .unwrap()
        .state;
        let text = render_log(&header(), &report.log, &state);
        let tampered = text.replacen("Foramen ovale (V3)", "Foramen rotundum", 1);
        assert_ne!(tampered, text);
        let r = replay_log(&SessionLog::parse(&tampered).unwrap(), Some(&c)).unwrap();
        assert!(!r.matches_footer());

        let mut lines: Vec<&str> = text.lines().collect();
        lines[5] = "{not json";
        match SessionLog::parse(&lines.join("\n")) {
            Err(HarnessError::CorruptLine { line, .. }) => assert_eq!(line, 6),
            other => panic!("{other:?}"),
        }

        let empty = SessionLog::parse("").unwrap();
        let r = replay_log(&empty, None).unwrap();
        assert_eq!(r.digest, digest_hex(&SessionState::default()));
        assert!(r.matches_footer());
    }

    #[test]
    fn non_decreasing_timelines_required() {
        let bad = r#"[{"t_ms": 5, "event": {"kind": "InspectRelease"}}, {"t_ms": 4, "event": {"kind": "InspectRelease"}}]"#;
        assert!(matches!(parse_script(bad), Err(HarnessError::InvalidInput(_))));
    }
}
