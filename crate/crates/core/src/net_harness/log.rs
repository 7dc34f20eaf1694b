//! JSON-lines session logs: one header line, one line per applied envelope in
//! global order, one footer line with the final digest.

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::HarnessError;
use crate::geometry::Vec3;
use crate::navigation::NavConfig;
use crate::protocol::{apply_envelope, Envelope, PROTOCOL_VERSION};
use crate::scene::{load_scene, AnatomyScene, SceneConfig, SceneError};
use crate::session_state::{digest_hex, Event, ReducerContext, SessionState};

/// Which scene a session ran against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum SceneSource {
    /// The built-in sample scene.
    Sample { config: SceneConfig },
    /// Mesh and metadata files. Relative paths resolve against the log's directory.
    Files {
        mesh: PathBuf,
        metadata: PathBuf,
        config: SceneConfig,
    },
}

impl SceneSource {
    pub fn load(&self, base_dir: &Path) -> Result<AnatomyScene, SceneError> {
        match self {
            SceneSource::Sample { config } => Ok(AnatomyScene::sample(config)),
            SceneSource::Files {
                mesh,
                metadata,
                config,
            } => load_scene(&base_dir.join(mesh), &base_dir.join(metadata), config),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub protocol: String,
    pub scene: SceneSource,
    pub nav: NavConfig,
}

impl LogHeader {
    pub fn new(scene: SceneSource, nav: NavConfig) -> Self {
        LogHeader {
            protocol: PROTOCOL_VERSION.to_owned(),
            scene,
            nav,
        }
    }

    pub fn context(&self, base_dir: &Path) -> Result<ReducerContext, SceneError> {
        Ok(ReducerContext::new(Arc::new(self.scene.load(base_dir)?), self.nav))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogFooter {
    pub digest: String,
    pub events: u64,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: LogHeader,
}

#[derive(Serialize, Deserialize)]
struct FooterLine {
    footer: LogFooter,
}

/// Streams a session log. Every line is flushed as written so a crash leaves
/// a valid prefix.
pub struct LogWriter<W: Write> {
    out: W,
    events: u64,
}

impl<W: Write> LogWriter<W> {
    pub fn new(mut out: W, header: &LogHeader) -> io::Result<Self> {
        serde_json::to_writer(&mut out, &HeaderLine { header: header.clone() })?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(LogWriter { out, events: 0 })
    }

    pub fn append(&mut self, envelope: &Envelope) -> io::Result<()> {
        self.out.write_all(envelope.to_json().as_bytes())?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        self.events += 1;
        Ok(())
    }

    /// Writes the footer and hands back the sink.
    pub fn finish(mut self, state: &SessionState) -> io::Result<W> {
        let footer = LogFooter {
            digest: digest_hex(state),
            events: self.events,
        };
        serde_json::to_writer(&mut self.out, &FooterLine { footer })?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(self.out)
    }
}

/// Renders a complete log in memory.
pub fn render_log(header: &LogHeader, entries: &[Envelope], final_state: &SessionState) -> String {
    let mut w = LogWriter::new(Vec::new(), header).expect("in-memory write");
    for e in entries {
        w.append(e).expect("in-memory write");
    }
    String::from_utf8(w.finish(final_state).expect("in-memory write")).expect("log is utf-8")
}

/// A log entry with the 1-based line it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct LogEntry {
    pub line: usize,
    pub envelope: Envelope,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SessionLog {
    pub header: Option<LogHeader>,
    pub entries: Vec<LogEntry>,
    pub footer: Option<LogFooter>,
}

impl SessionLog {
    pub fn parse(text: &str) -> Result<SessionLog, HarnessError> {
        let mut log = SessionLog::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let corrupt = |message: String| HarnessError::CorruptLine { line, message };
            if log.footer.is_some() {
                return Err(corrupt("content after the footer".into()));
            }
            let value: Value = serde_json::from_str(raw).map_err(|e| corrupt(e.to_string()))?;
            if value.get("header").is_some() {
                if log.header.is_some() || !log.entries.is_empty() {
                    return Err(corrupt("header must be the first line".into()));
                }
                let h: HeaderLine = serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
                if h.header.protocol != PROTOCOL_VERSION {
                    return Err(corrupt(format!("unsupported protocol {:?}", h.header.protocol)));
                }
                log.header = Some(h.header);
            } else if value.get("footer").is_some() {
                let f: FooterLine = serde_json::from_value(value).map_err(|e| corrupt(e.to_string()))?;
                log.footer = Some(f.footer);
            } else {
                let envelope = Envelope::from_value(value).map_err(|e| corrupt(e.to_string()))?;
                if envelope.as_event().is_none() {
                    return Err(corrupt("log entries must carry events".into()));
                }
                log.entries.push(LogEntry { line, envelope });
            }
        }
        Ok(log)
    }

    pub fn read(path: &Path) -> Result<SessionLog, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        SessionLog::parse(&text)
    }

    pub fn envelopes(&self) -> impl Iterator<Item = &Envelope> {
        self.entries.iter().map(|e| &e.envelope)
    }

    /// Reducer context described by the header. A log without events needs none.
    pub fn context(&self, base_dir: &Path) -> Result<Option<ReducerContext>, HarnessError> {
        match &self.header {
            Some(h) => h.context(base_dir).map(Some).map_err(HarnessError::Scene),
            None if self.entries.is_empty() => Ok(None),
            None => Err(HarnessError::CorruptLine {
                line: 1,
                message: "missing header".into(),
            }),
        }
    }
}

/// Result of re-applying a log.
#[derive(Clone, Debug, PartialEq)]
pub struct Replayed {
    pub state: SessionState,
    pub digest: String,
    pub events: u64,
    pub footer: Option<LogFooter>,
}

impl Replayed {
    /// Whether the replayed digest matches the recorded footer. An empty log
    /// without a footer trivially matches.
    pub fn matches_footer(&self) -> bool {
        match &self.footer {
            Some(f) => f.digest == self.digest && f.events == self.events,
            None => self.events == 0,
        }
    }
}

/// Applies every entry from the initial state. Every entry must apply, since
/// the log only ever records accepted events.
pub fn replay_log(log: &SessionLog, ctx: Option<&ReducerContext>) -> Result<Replayed, HarnessError> {
    let mut state = SessionState::default();
    for (i, entry) in log.entries.iter().enumerate() {
        let ctx = ctx.ok_or(HarnessError::CorruptLine {
            line: entry.line,
            message: "no scene to replay against".into(),
        })?;
        let expected = i as u64 + 1;
        if entry.envelope.order.is_some_and(|o| o != expected) {
            return Err(HarnessError::CorruptLine {
                line: entry.line,
                message: format!("order {:?}, expected {expected}", entry.envelope.order),
            });
        }
        state = apply_envelope(&state, &entry.envelope, ctx)
            .map_err(|reason| HarnessError::Rejected {
                line: entry.line,
                reason,
            })?
            .0;
    }
    Ok(Replayed {
        digest: digest_hex(&state),
        state,
        events: log.entries.len() as u64,
        footer: log.footer.clone(),
    })
}

/// Reads and replays a log file. Scene paths resolve against its directory.
pub fn replay(path: &Path) -> Result<Replayed, HarnessError> {
    let log = SessionLog::read(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let ctx = log.context(base)?;
    replay_log(&log, ctx.as_ref())
}

/// Checks that every `RepositionCommand` moved the platform in exactly one
/// step. The platform must land on the target at that event, no later pose
/// may put it strictly between the old position and the target, and no
/// non-discrete event may move it further than `max_step`. Returns the
/// number of repositions checked.
pub fn check_reposition_discreteness(
    log: &SessionLog,
    ctx: &ReducerContext,
    max_step: f64,
) -> Result<usize, HarnessError> {
    const ON_SEGMENT: f64 = 1e-9;
    let strictly_between = |p: Vec3, a: Vec3, b: Vec3| {
        let ab = b - a;
        let len2 = ab.length_squared();
        if len2 < 1e-18 {
            return false;
        }
        let t = (p - a).dot(ab) / len2;
        t > ON_SEGMENT && t < 1.0 - ON_SEGMENT && (a + ab * t).distance(p) < ON_SEGMENT
    };
    let mut state = SessionState::default();
    let mut repositions = 0;
    // Old position and target of the most recent reposition, until the next
    // discrete platform change.
    let mut watch: Option<(Vec3, Vec3)> = None;
    for entry in &log.entries {
        let line = entry.line;
        let before = state.student.platform.position;
        state = apply_envelope(&state, &entry.envelope, ctx)
            .map_err(|reason| HarnessError::Rejected { line, reason })?
            .0;
        let after = state.student.platform.position;
        let fail = |message: String| HarnessError::Discreteness { line, message };
        match entry.envelope.as_event() {
            Some(Event::RepositionCommand { target }) => {
                if after != *target {
                    return Err(fail(format!("platform at {after:?} after reposition to {target:?}")));
                }
                repositions += 1;
                watch = Some((before, *target));
            }
            Some(Event::TeleportCommit { .. }) => watch = None,
            _ => {
                if before.distance(after) > max_step {
                    return Err(fail(format!(
                        "platform jumped {:.3} m without a teleport or reposition",
                        before.distance(after)
                    )));
                }
                if let Some((from, to)) = watch {
                    if after != before && strictly_between(after, from, to) {
                        return Err(fail(format!("interpolated platform position {after:?}")));
                    }
                }
            }
        }
    }
    Ok(repositions)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnnotationExport {
    pub landmarks: Vec<crate::session_state::Landmark>,
    pub labels: Vec<crate::session_state::Label>,
    pub sketches: Vec<crate::session_state::Sketch>,
}

pub fn export_annotations(state: &SessionState) -> AnnotationExport {
    AnnotationExport {
        landmarks: state.landmarks.values().cloned().collect(),
        labels: state.labels.values().cloned().collect(),
        sketches: state.sketches.values().cloned().collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub order: u64,
    pub kind: &'static str,
    pub position: Vec3,
}

/// Student platform positions after each applied event that can move it.
pub fn export_trajectory(
    log: &SessionLog,
    ctx: Option<&ReducerContext>,
) -> Result<Vec<TrajectoryPoint>, HarnessError> {
    let mut state = SessionState::default();
    let mut points = Vec::new();
    for (i, entry) in log.entries.iter().enumerate() {
        let ctx = ctx.ok_or(HarnessError::CorruptLine {
            line: entry.line,
            message: "no scene to replay against".into(),
        })?;
        state = apply_envelope(&state, &entry.envelope, ctx)
            .map_err(|reason| HarnessError::Rejected {
                line: entry.line,
                reason,
            })?
            .0;
        let event = entry.envelope.as_event().expect("log entries carry events");
        if event.affects_platform() {
            points.push(TrajectoryPoint {
                order: entry.envelope.order.unwrap_or(i as u64 + 1),
                kind: event.kind(),
                position: state.student.platform.position,
            });
        }
    }
    Ok(points)
}
