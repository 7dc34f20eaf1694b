use serde::{Deserialize, Serialize};

use super::model::{AnnotationId, Brush, LabelTag, Role, StudentMode, TeacherTool};
use crate::geometry::{Pose, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSelection {
    Student(StudentMode),
    Teacher(TeacherTool),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilityScope {
    All,
    Annotation(AnnotationId),
}

/// Everything that can change the shared state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Event {
    /// Tracking update. For the student, poses are relative to the platform and
    /// `platform` only applies if `platform_epoch` matches the state. For the
    /// teacher, `head` is the view pose.
    PoseUpdate {
        role: Role,
        timestamp_ms: u64,
        head: Pose,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        left: Option<Pose>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        right: Option<Pose>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        platform: Option<Pose>,
        #[serde(default)]
        platform_epoch: u64,
    },
    ModeChange {
        mode: ModeSelection,
    },
    BeamAdjust {
        swipe_delta: f64,
    },
    TeleportCommit {
        target: Vec3,
    },
    RepositionCommand {
        target: Vec3,
    },
    LandmarkPlace {
        position: Vec3,
    },
    LabelCreate {
        anchor: Vec3,
        normal: Vec3,
    },
    LabelDrag {
        id: AnnotationId,
        offset_tip: Vec3,
    },
    LabelEdit {
        id: AnnotationId,
        headline: String,
        description: String,
        tag: LabelTag,
    },
    SketchBegin {
        id: AnnotationId,
        color: [u8; 3],
        brush: Brush,
    },
    SketchAppend {
        id: AnnotationId,
        points: Vec<Vec3>,
    },
    SketchEnd {
        id: AnnotationId,
    },
    SketchDelete {
        id: AnnotationId,
    },
    VisibilitySet {
        scope: VisibilityScope,
        visible: bool,
    },
    InspectSelect {
        structure_id: String,
    },
    InspectRelease,
    HapticCue {
        role: Role,
        pattern: String,
    },
}

/// Event names, for tolerant decoding of unknown variants.
pub const EVENT_KINDS: &[&str] = &[
    "PoseUpdate",
    "ModeChange",
    "BeamAdjust",
    "TeleportCommit",
    "RepositionCommand",
    "LandmarkPlace",
    "LabelCreate",
    "LabelDrag",
    "LabelEdit",
    "SketchBegin",
    "SketchAppend",
    "SketchEnd",
    "SketchDelete",
    "VisibilitySet",
    "InspectSelect",
    "InspectRelease",
    "HapticCue",
];

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::PoseUpdate { .. } => "PoseUpdate",
            Event::ModeChange { .. } => "ModeChange",
            Event::BeamAdjust { .. } => "BeamAdjust",
            Event::TeleportCommit { .. } => "TeleportCommit",
            Event::RepositionCommand { .. } => "RepositionCommand",
            Event::LandmarkPlace { .. } => "LandmarkPlace",
            Event::LabelCreate { .. } => "LabelCreate",
            Event::LabelDrag { .. } => "LabelDrag",
            Event::LabelEdit { .. } => "LabelEdit",
            Event::SketchBegin { .. } => "SketchBegin",
            Event::SketchAppend { .. } => "SketchAppend",
            Event::SketchEnd { .. } => "SketchEnd",
            Event::SketchDelete { .. } => "SketchDelete",
            Event::VisibilitySet { .. } => "VisibilitySet",
            Event::InspectSelect { .. } => "InspectSelect",
            Event::InspectRelease => "InspectRelease",
            Event::HapticCue { .. } => "HapticCue",
        }
    }

    /// The role allowed to originate this event.
    pub fn authority(&self) -> Role {
        match self {
            Event::PoseUpdate { role, .. } => *role,
            Event::ModeChange {
                mode: ModeSelection::Student(_),
            } => Role::Student,
            Event::ModeChange {
                mode: ModeSelection::Teacher(_),
            } => Role::Teacher,
            Event::BeamAdjust { .. }
            | Event::TeleportCommit { .. }
            | Event::InspectSelect { .. }
            | Event::InspectRelease => Role::Student,
            Event::RepositionCommand { .. }
            | Event::LandmarkPlace { .. }
            | Event::LabelCreate { .. }
            | Event::LabelDrag { .. }
            | Event::LabelEdit { .. }
            | Event::SketchBegin { .. }
            | Event::SketchAppend { .. }
            | Event::SketchEnd { .. }
            | Event::SketchDelete { .. }
            | Event::VisibilitySet { .. }
            | Event::HapticCue { .. } => Role::Teacher,
        }
    }

    /// Shared annotation content, as opposed to avatar or control state.
    pub fn is_annotation(&self) -> bool {
        matches!(
            self,
            Event::LandmarkPlace { .. }
                | Event::LabelCreate { .. }
                | Event::LabelDrag { .. }
                | Event::LabelEdit { .. }
                | Event::SketchBegin { .. }
                | Event::SketchAppend { .. }
                | Event::SketchEnd { .. }
                | Event::SketchDelete { .. }
                | Event::VisibilitySet { .. }
        )
    }

    pub fn is_pose(&self) -> bool {
        matches!(self, Event::PoseUpdate { .. })
    }

    /// Whether applying this event can move the student platform.
    pub fn affects_platform(&self) -> bool {
        matches!(
            self,
            Event::TeleportCommit { .. }
                | Event::RepositionCommand { .. }
                | Event::PoseUpdate {
                    role: Role::Student,
                    platform: Some(_),
                    ..
                }
        )
    }
}

/// Side effects a frontend should perform; never part of state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum DerivedEffect {
    HapticCue { role: Role, pattern: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, thiserror::Error)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    #[error("not found")]
    NotFound,
    #[error("sketch is closed")]
    SketchClosed,
    #[error("headline too long")]
    HeadlineTooLong,
    #[error("target obstructed")]
    TargetObstructed,
    #[error("wrong mode")]
    WrongMode,
    #[error("point is not on a scene surface")]
    OffSurface,
    #[error("pose timestamp is not newer than the last one")]
    StalePose,
    #[error("invalid pose")]
    InvalidPose,
    #[error("view pitch exceeds the clamp")]
    PitchOutOfRange,
    #[error("annotation id already used")]
    IdInUse,
    #[error("non-finite or out-of-range value")]
    InvalidValue,
    #[error("annotation cannot be hidden")]
    NotHideable,
    #[error("unknown structure")]
    UnknownStructure,
    #[error("sender lacks authority for this event")]
    Forbidden,
    #[error("payload not allowed on this channel")]
    WrongChannel,
    #[error("peer has not joined")]
    NotJoined,
    #[error("unsupported payload")]
    Unsupported,
}
