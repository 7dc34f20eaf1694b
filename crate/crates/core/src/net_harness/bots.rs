use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::geometry::{Pose, Quat, Vec3};
use crate::navigation::{free_fly_step, NavConfig};
use crate::protocol::Sender;
use crate::session_state::{
    Brush, Event, LabelTag, ModeSelection, Role, StudentMode, TeacherTool, VisibilityScope,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedEvent {
    pub t_ms: u64,
    pub event: Event,
}

/// A peer that replays a fixed timeline of events.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScriptedBot {
    pub role: Sender,
    /// When a client bot connects. Ignored for the host.
    #[serde(default)]
    pub join_at_ms: u64,
    pub timeline: Vec<TimedEvent>,
}

impl ScriptedBot {
    pub fn new(role: Sender, timeline: Vec<TimedEvent>) -> Self {
        ScriptedBot {
            role,
            join_at_ms: 0,
            timeline,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if let Some(w) = self.timeline.windows(2).find(|w| w[1].t_ms < w[0].t_ms) {
            return Err(HarnessError::InvalidInput(format!(
                "{} timeline goes back from {} ms to {} ms",
                self.role, w[0].t_ms, w[1].t_ms
            )));
        }
        Ok(())
    }
}

/// Parses a bot script: a JSON array of `{t_ms, event}`.
pub fn parse_script(text: &str) -> Result<Vec<TimedEvent>, HarnessError> {
    let timeline: Vec<TimedEvent> = serde_json::from_str(text).map_err(|e| HarnessError::CorruptLine {
        line: e.line(),
        message: e.to_string(),
    })?;
    ScriptedBot::new(Sender::StudentClient, timeline.clone()).validate()?;
    Ok(timeline)
}

pub fn load_script(path: &Path) -> Result<Vec<TimedEvent>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    parse_script(&text)
}

fn at(t_ms: u64, event: Event) -> TimedEvent {
    TimedEvent { t_ms, event }
}

fn floor(x: f64, z: f64) -> Vec3 {
    Vec3::new(x, 0.0, z)
}

/// Where the teacher bot repositions the student.
pub const FIXTURE_REPOSITION: Vec3 = Vec3::new(1.0, 0.05, -1.0);
/// Where the student bot teleports.
pub const FIXTURE_TELEPORT: Vec3 = Vec3::new(-1.0, 0.05, 1.0);

const POSE_PERIOD_MS: u64 = 33;

/// Teacher at the host: three landmarks, a label through its whole workflow,
/// a sketch, a visibility toggle, a reposition and a slowly orbiting view.
pub fn teacher_bot() -> ScriptedBot {
    let mut t = vec![
        at(100, Event::ModeChange { mode: ModeSelection::Teacher(TeacherTool::Landmark) }),
        at(200, Event::LandmarkPlace { position: floor(1.5, 0.5) }),
        at(500, Event::LabelCreate { anchor: floor(-0.5, -0.5), normal: Vec3::Y }),
        at(700, Event::LabelDrag { id: 2, offset_tip: Vec3::new(-0.4, 0.6, -0.5) }),
        at(900, Event::LabelEdit {
            id: 2,
            headline: "Foramen ovale".into(),
            description: "Passage for the mandibular nerve".into(),
            tag: LabelTag::Yellow,
        }),
        at(1400, Event::LandmarkPlace { position: floor(-1.5, 1.0) }),
        at(2000, Event::SketchBegin { id: 100, color: [255, 64, 0], brush: Brush::Small }),
        at(2100, Event::SketchAppend {
            id: 100,
            points: (0..8).map(|i| Vec3::new(0.1 * i as f64, 1.0, 0.5)).collect(),
        }),
        at(2200, Event::SketchAppend {
            id: 100,
            points: (8..16).map(|i| Vec3::new(0.1 * i as f64, 1.0 + 0.05 * (i - 8) as f64, 0.5)).collect(),
        }),
        at(2300, Event::SketchEnd { id: 100 }),
        at(3000, Event::RepositionCommand { target: FIXTURE_REPOSITION }),
        at(3400, Event::LandmarkPlace { position: floor(0.5, -2.0) }),
        at(4200, Event::VisibilitySet { scope: VisibilityScope::Annotation(2), visible: false }),
        at(4500, Event::HapticCue { role: Role::Student, pattern: "attention".into() }),
    ];
    let mut views: Vec<TimedEvent> = (0..50u64)
        .map(|i| {
            let yaw = 0.02 * i as f64;
            let orientation = Quat::from_yaw_pitch(yaw, -0.5);
            let position = Vec3::new(0.0, 3.0, 0.0) - orientation.forward() * 6.0;
            at(
                50 + i * 100,
                Event::PoseUpdate {
                    role: Role::Teacher,
                    timestamp_ms: 50 + i * 100,
                    head: Pose::new(position, orientation),
                    left: None,
                    right: None,
                    platform: None,
                    platform_epoch: 0,
                },
            )
        })
        .collect();
    t.append(&mut views);
    t.sort_by_key(|e| e.t_ms);
    ScriptedBot::new(Sender::TeacherHost, t)
}

/// Student flying around, teleporting once, using inspect mode, and trying
/// one event it has no authority for.
///
/// Platform poses carry the epoch the student believes in: 0 before its
/// teleport, 1 after it, 2 once the teacher's reposition is expected to have
/// landed. Stale ones are ignored by the reducer.
pub fn student_bot(nav: &NavConfig) -> ScriptedBot {
    let mut t = Vec::new();
    let mut platform = Pose::IDENTITY;
    let mut epoch = 0;
    let end_ms = 5000;
    let mut ts = 0;
    while ts <= end_ms {
        if ts == 1617 {
            // The teleport lands between two pose samples.
            platform = Pose::from_position(FIXTURE_TELEPORT);
            epoch = 1;
        }
        if ts >= 3500 && epoch == 1 {
            platform = Pose::from_position(FIXTURE_REPOSITION);
            epoch = 2;
        }
        let phase = ts as f64 * 1e-3;
        let yaw = 0.6 * phase.sin();
        let right = Pose::new(Vec3::new(0.25, 1.2, -0.3), Quat::from_yaw_pitch(yaw, -0.2));
        if (300..1500).contains(&ts) || (3600..4400).contains(&ts) {
            platform = free_fly_step(&platform, &right, POSE_PERIOD_MS as f64 * 1e-3, nav)
                .expect("valid fly step");
        }
        t.push(at(
            ts,
            Event::PoseUpdate {
                role: Role::Student,
                timestamp_ms: ts,
                head: Pose::new(
                    Vec3::new(0.05 * phase.sin(), 1.7, 0.05 * phase.cos()),
                    Quat::from_yaw(yaw * 0.5),
                ),
                left: Some(Pose::from_position(Vec3::new(-0.25, 1.2, -0.3))),
                right: Some(right),
                platform: Some(platform),
                platform_epoch: epoch,
            },
        ));
        ts += POSE_PERIOD_MS;
    }
    t.extend([
        at(1550, Event::BeamAdjust { swipe_delta: 0.4 }),
        at(1600, Event::TeleportCommit { target: FIXTURE_TELEPORT }),
        at(2400, Event::ModeChange { mode: ModeSelection::Student(StudentMode::Handbook) }),
        at(2600, Event::ModeChange { mode: ModeSelection::Student(StudentMode::Inspect) }),
        at(2700, Event::InspectSelect { structure_id: "canalis_opticus".into() }),
        at(3300, Event::InspectRelease),
        at(3350, Event::ModeChange { mode: ModeSelection::Student(StudentMode::Navigation) }),
        // Not the student's to place; the host rejects it.
        at(4000, Event::LandmarkPlace { position: floor(0.0, 0.0) }),
    ]);
    t.sort_by_key(|e| e.t_ms);
    ScriptedBot::new(Sender::StudentClient, t)
}

/// Console joining mid-session: places a landmark, draws, labels and edits
/// the teacher's label.
pub fn console_bot() -> ScriptedBot {
    let t = vec![
        at(1300, Event::ModeChange { mode: ModeSelection::Teacher(TeacherTool::Sketch) }),
        at(1500, Event::LandmarkPlace { position: floor(-1.0, -1.5) }),
        at(2500, Event::SketchBegin { id: 200, color: [0, 128, 255], brush: Brush::Large }),
        at(2550, Event::SketchAppend {
            id: 200,
            points: (0..6).map(|i| Vec3::new(-1.0, 0.5 + 0.1 * i as f64, -1.0)).collect(),
        }),
        at(2650, Event::SketchEnd { id: 200 }),
        at(3800, Event::LabelCreate { anchor: floor(2.0, 0.0), normal: Vec3::Y }),
        at(4100, Event::LabelEdit {
            id: 2,
            headline: "Foramen ovale (V3)".into(),
            description: "Mandibular division of the trigeminal nerve".into(),
            tag: LabelTag::Red,
        }),
    ];
    ScriptedBot {
        role: Sender::Console,
        join_at_ms: 1200,
        timeline: t,
    }
}

/// The three fixture bots used by convergence tests and the shipped scripts.
pub fn fixture_bots(nav: &NavConfig) -> Vec<ScriptedBot> {
    vec![teacher_bot(), student_bot(nav), console_bot()]
}

/// Length of the fixture timelines.
pub const FIXTURE_DURATION_MS: u64 = 5000;
