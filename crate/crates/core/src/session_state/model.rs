use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{Pose, Quat, Vec3};

pub type AnnotationId = u64;

/// Maximum label headline length, in characters.
pub const MAX_HEADLINE_CHARS: usize = 120;
/// Default label tip offset along the anchor's surface normal.
pub const LABEL_TIP_OFFSET: f64 = 0.2;
/// Appended sketch points closer than this to the previous point are dropped.
pub const SKETCH_DECIMATION: f64 = 1e-3;
/// Points handed to the reducer as surface points must lie this close to geometry.
pub const SURFACE_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_BEAM_LENGTH: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Student,
    Teacher,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudentMode {
    Handbook,
    #[default]
    Navigation,
    Inspect,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherTool {
    Label,
    Sketch,
    Landmark,
    #[default]
    None,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelTag {
    Red,
    Blue,
    Yellow,
    #[default]
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Brush {
    Small,
    Large,
}

impl Brush {
    /// Tube radius in world meters.
    pub fn radius(self) -> f64 {
        match self {
            Brush::Small => 0.02,
            Brush::Large => 0.06,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: AnnotationId,
    pub position: Vec3,
    pub active: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Label {
    pub id: AnnotationId,
    pub anchor: Vec3,
    /// Surface normal at the anchor.
    pub normal: Vec3,
    pub offset_tip: Vec3,
    pub headline: String,
    pub description: String,
    pub tag: LabelTag,
    pub visible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sketch {
    pub id: AnnotationId,
    pub color: [u8; 3],
    pub brush: Brush,
    pub points: Vec<Vec3>,
    pub closed: bool,
    pub visible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InspectCopy {
    pub structure_id: String,
    /// Placement relative to the platform.
    pub local_offset: Pose,
}

/// Where a fresh inspection copy appears, relative to the platform.
pub fn default_inspect_offset() -> Pose {
    Pose::new(Vec3::new(0.0, 1.2, -0.6), Quat::IDENTITY)
}

/// Student avatar state. Head and controller poses are tracking-space poses
/// relative to `platform`; `platform` is the world pose of the tracked area.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudentState {
    pub head: Pose,
    pub left_controller: Pose,
    pub right_controller: Pose,
    pub platform: Pose,
    pub mode: StudentMode,
    pub inspect_copy: Option<InspectCopy>,
    pub beam_length: f64,
    /// Incremented by every discrete platform change (teleport, reposition).
    /// Pose updates carrying a platform from an older epoch leave it alone.
    pub platform_epoch: u64,
    pub last_pose_ms: Option<u64>,
}

impl Default for StudentState {
    fn default() -> Self {
        StudentState {
            head: Pose::from_position(Vec3::new(0.0, 1.7, 0.0)),
            left_controller: Pose::from_position(Vec3::new(-0.25, 1.2, -0.3)),
            right_controller: Pose::from_position(Vec3::new(0.25, 1.2, -0.3)),
            platform: Pose::IDENTITY,
            mode: StudentMode::default(),
            inspect_copy: None,
            beam_length: DEFAULT_BEAM_LENGTH,
            platform_epoch: 0,
            last_pose_ms: None,
        }
    }
}

impl StudentState {
    pub fn world_head(&self) -> Pose {
        self.platform.compose(&self.head)
    }

    /// The menu controller.
    pub fn world_left_controller(&self) -> Pose {
        self.platform.compose(&self.left_controller)
    }

    /// The interaction controller, which carries the beam and landmark arrow.
    pub fn world_right_controller(&self) -> Pose {
        self.platform.compose(&self.right_controller)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TeacherState {
    pub view: Pose,
    pub tool: TeacherTool,
    pub annotations_shown: bool,
    pub last_pose_ms: Option<u64>,
}

impl Default for TeacherState {
    fn default() -> Self {
        TeacherState {
            view: Pose::new(Vec3::new(0.0, 6.0, 9.0), Quat::from_yaw_pitch(0.0, -0.5)),
            tool: TeacherTool::default(),
            annotations_shown: true,
            last_pose_ms: None,
        }
    }
}

/// Authoritative shared state. Highlighting and other view-local state is not
/// part of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub landmarks: BTreeMap<AnnotationId, Landmark>,
    pub labels: BTreeMap<AnnotationId, Label>,
    pub sketches: BTreeMap<AnnotationId, Sketch>,
    pub student: StudentState,
    pub teacher: TeacherState,
    pub next_id: AnnotationId,
    /// Count of accepted events.
    pub applied_events: u64,
    /// Highest applied envelope sequence number per `sender/channel`.
    pub applied_seq: BTreeMap<String, u64>,
}

impl Default for SessionState {
    fn default() -> Self {
        SessionState {
            landmarks: BTreeMap::new(),
            labels: BTreeMap::new(),
            sketches: BTreeMap::new(),
            student: StudentState::default(),
            teacher: TeacherState::default(),
            next_id: 1,
            applied_events: 0,
            applied_seq: BTreeMap::new(),
        }
    }
}

impl SessionState {
    pub fn active_landmark(&self) -> Option<&Landmark> {
        self.landmarks.values().find(|l| l.active)
    }

    /// Records an applied envelope sequence number; it never moves backwards.
    pub fn record_seq(&mut self, key: &str, seq: u64) {
        let slot = self.applied_seq.entry(key.to_owned()).or_insert(0);
        *slot = (*slot).max(seq);
    }

    pub fn is_id_used(&self, id: AnnotationId) -> bool {
        id < self.next_id
    }
}
