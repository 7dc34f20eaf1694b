//! The pure reducer: `(state, event) -> (state', effects)` or a rejection.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::event::{DerivedEffect, Event, ModeSelection, RejectReason, VisibilityScope};
use super::model::*;
use crate::geometry::{capsule_clear, Pose, RayHit, Vec3};
use crate::navigation::{adjust_beam, NavConfig};
use crate::scene::AnatomyScene;

/// Read-only inputs the reducer validates against.
#[derive(Clone, Debug)]
pub struct ReducerContext {
    pub scene: Arc<AnatomyScene>,
    pub nav: NavConfig,
}

impl ReducerContext {
    pub fn new(scene: Arc<AnatomyScene>, nav: NavConfig) -> Self {
        ReducerContext { scene, nav }
    }

    pub fn on_surface(&self, p: Vec3) -> bool {
        p.is_finite() && self.scene.bvh().distance_to_surface(p, SURFACE_TOLERANCE).is_some()
    }

    pub fn standing_clear(&self, base: Vec3) -> bool {
        base.is_finite() && capsule_clear(self.scene.bvh(), &self.nav.capsule_template().at(base))
    }
}

pub type Applied = (SessionState, Vec<DerivedEffect>);

/// Applies one event. Pure: the input state is never modified, and a
/// rejection means nothing changed.
pub fn apply_event(
    state: &SessionState,
    event: &Event,
    ctx: &ReducerContext,
) -> Result<Applied, RejectReason> {
    let mut next = state.clone();
    let effects = reduce(&mut next, event, ctx)?;
    next.applied_events += 1;
    Ok((next, effects))
}

fn check(cond: bool, reason: RejectReason) -> Result<(), RejectReason> {
    if cond {
        Ok(())
    } else {
        Err(reason)
    }
}

fn valid_pose(p: &Pose) -> bool {
    p.is_valid()
}

fn reduce(
    s: &mut SessionState,
    event: &Event,
    ctx: &ReducerContext,
) -> Result<Vec<DerivedEffect>, RejectReason> {
    let mut effects = Vec::new();
    match event {
        Event::PoseUpdate {
            role,
            timestamp_ms,
            head,
            left,
            right,
            platform,
            platform_epoch,
        } => {
            let poses = [Some(head), left.as_ref(), right.as_ref(), platform.as_ref()];
            check(poses.iter().flatten().all(|p| valid_pose(p)), RejectReason::InvalidPose)?;
            match role {
                Role::Student => {
                    let st = &mut s.student;
                    check(st.last_pose_ms.is_none_or(|t| *timestamp_ms > t), RejectReason::StalePose)?;
                    st.head = *head;
                    if let Some(l) = left {
                        st.left_controller = *l;
                    }
                    if let Some(r) = right {
                        st.right_controller = *r;
                    }
                    if let Some(p) = platform {
                        if *platform_epoch == st.platform_epoch {
                            st.platform = *p;
                        }
                    }
                    st.last_pose_ms = Some(*timestamp_ms);
                }
                Role::Teacher => {
                    let t = &mut s.teacher;
                    check(t.last_pose_ms.is_none_or(|l| *timestamp_ms > l), RejectReason::StalePose)?;
                    let (_, pitch, _) = head.orientation.yaw_pitch_roll();
                    check(pitch.abs() <= ctx.nav.pitch_clamp() + 1e-9, RejectReason::PitchOutOfRange)?;
                    t.view = *head;
                    t.last_pose_ms = Some(*timestamp_ms);
                }
            }
        }
        Event::ModeChange { mode } => match mode {
            ModeSelection::Student(m) => {
                if *m != StudentMode::Inspect {
                    s.student.inspect_copy = None;
                }
                s.student.mode = *m;
            }
            ModeSelection::Teacher(tool) => s.teacher.tool = *tool,
        },
        Event::BeamAdjust { swipe_delta } => {
            check(
                swipe_delta.is_finite() && swipe_delta.abs() <= 1.0,
                RejectReason::InvalidValue,
            )?;
            s.student.beam_length = adjust_beam(s.student.beam_length, *swipe_delta, &ctx.nav);
        }
        Event::TeleportCommit { target } => {
            check(s.student.mode == StudentMode::Navigation, RejectReason::WrongMode)?;
            check(target.is_finite(), RejectReason::InvalidValue)?;
            check(ctx.standing_clear(*target), RejectReason::TargetObstructed)?;
            s.student.platform.position = *target;
            s.student.platform_epoch += 1;
        }
        Event::RepositionCommand { target } => {
            check(target.is_finite(), RejectReason::InvalidValue)?;
            check(ctx.standing_clear(*target), RejectReason::TargetObstructed)?;
            s.student.platform.position = *target;
            s.student.platform_epoch += 1;
        }
        Event::LandmarkPlace { position } => {
            check(ctx.on_surface(*position), RejectReason::OffSurface)?;
            for l in s.landmarks.values_mut() {
                l.active = false;
            }
            let id = s.next_id;
            s.next_id += 1;
            s.landmarks.insert(
                id,
                Landmark {
                    id,
                    position: *position,
                    active: true,
                },
            );
            effects.push(DerivedEffect::HapticCue {
                role: Role::Student,
                pattern: "landmark".into(),
            });
        }
        Event::LabelCreate { anchor, normal } => {
            check(ctx.on_surface(*anchor), RejectReason::OffSurface)?;
            let normal = normal
                .is_finite()
                .then(|| normal.try_normalize())
                .flatten()
                .ok_or(RejectReason::InvalidValue)?;
            let id = s.next_id;
            s.next_id += 1;
            s.labels.insert(
                id,
                Label {
                    id,
                    anchor: *anchor,
                    normal,
                    offset_tip: *anchor + normal * LABEL_TIP_OFFSET,
                    headline: String::new(),
                    description: String::new(),
                    tag: LabelTag::None,
                    visible: true,
                },
            );
        }
        Event::LabelDrag { id, offset_tip } => {
            check(offset_tip.is_finite(), RejectReason::InvalidValue)?;
            let label = s.labels.get_mut(id).ok_or(RejectReason::NotFound)?;
            label.offset_tip = *offset_tip;
        }
        Event::LabelEdit {
            id,
            headline,
            description,
            tag,
        } => {
            let label = s.labels.get_mut(id).ok_or(RejectReason::NotFound)?;
            check(headline.chars().count() <= MAX_HEADLINE_CHARS, RejectReason::HeadlineTooLong)?;
            label.headline = headline.clone();
            label.description = description.clone();
            label.tag = *tag;
        }
        Event::SketchBegin { id, color, brush } => {
            check(!s.is_id_used(*id), RejectReason::IdInUse)?;
            s.next_id = id + 1;
            s.sketches.insert(
                *id,
                Sketch {
                    id: *id,
                    color: *color,
                    brush: *brush,
                    points: Vec::new(),
                    closed: false,
                    visible: true,
                },
            );
        }
        Event::SketchAppend { id, points } => {
            let sketch = s.sketches.get_mut(id).ok_or(RejectReason::NotFound)?;
            check(!sketch.closed, RejectReason::SketchClosed)?;
            check(points.iter().all(|p| p.is_finite()), RejectReason::InvalidValue)?;
            for &p in points {
                if sketch
                    .points
                    .last()
                    .is_none_or(|last| last.distance(p) >= SKETCH_DECIMATION)
                {
                    sketch.points.push(p);
                }
            }
        }
        Event::SketchEnd { id } => {
            let sketch = s.sketches.get_mut(id).ok_or(RejectReason::NotFound)?;
            check(!sketch.closed, RejectReason::SketchClosed)?;
            sketch.closed = true;
        }
        Event::SketchDelete { id } => {
            s.sketches.remove(id).ok_or(RejectReason::NotFound)?;
        }
        Event::VisibilitySet { scope, visible } => match scope {
            VisibilityScope::All => s.teacher.annotations_shown = *visible,
            VisibilityScope::Annotation(id) => {
                if let Some(l) = s.labels.get_mut(id) {
                    l.visible = *visible;
                } else if let Some(k) = s.sketches.get_mut(id) {
                    k.visible = *visible;
                } else if s.landmarks.contains_key(id) {
                    return Err(RejectReason::NotHideable);
                } else {
                    return Err(RejectReason::NotFound);
                }
            }
        },
        Event::InspectSelect { structure_id } => {
            check(s.student.mode == StudentMode::Inspect, RejectReason::WrongMode)?;
            check(ctx.scene.contains(structure_id), RejectReason::UnknownStructure)?;
            s.student.inspect_copy = Some(InspectCopy {
                structure_id: structure_id.clone(),
                local_offset: default_inspect_offset(),
            });
        }
        Event::InspectRelease => {
            check(s.student.inspect_copy.is_some(), RejectReason::NotFound)?;
            s.student.inspect_copy = None;
        }
        Event::HapticCue { role, pattern } => {
            effects.push(DerivedEffect::HapticCue {
                role: *role,
                pattern: pattern.clone(),
            });
        }
    }
    Ok(effects)
}

/// An open label draft: the id the reducer will assign plus the events for
/// each step of the create, drag, edit workflow.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelDraft {
    pub id: AnnotationId,
    pub create: Event,
}

impl LabelDraft {
    pub fn drag(&self, offset_tip: Vec3) -> Event {
        Event::LabelDrag {
            id: self.id,
            offset_tip,
        }
    }

    pub fn edit(&self, headline: &str, description: &str, tag: LabelTag) -> Event {
        Event::LabelEdit {
            id: self.id,
            headline: headline.to_owned(),
            description: description.to_owned(),
            tag,
        }
    }
}

/// Starts the label workflow from a surface pick. The id prediction holds when
/// the create event is the next id-allocating event the host applies.
pub fn create_label_workflow(state: &SessionState, anchor_hit: &RayHit) -> LabelDraft {
    LabelDraft {
        id: state.next_id,
        create: Event::LabelCreate {
            anchor: anchor_hit.point,
            normal: anchor_hit.normal,
        },
    }
}

/// Builds the discrete reposition command, refusing obstructed targets.
pub fn reposition_student(
    _state: &SessionState,
    ctx: &ReducerContext,
    target: Vec3,
) -> Result<Event, RejectReason> {
    check(ctx.standing_clear(target), RejectReason::TargetObstructed)?;
    Ok(Event::RepositionCommand { target })
}

pub const SNAPSHOT_VERSION: u32 = 1;

/// Complete serializable image of a session, for late joiners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u32,
    pub state: SessionState,
}

pub fn snapshot(state: &SessionState) -> Snapshot {
    Snapshot {
        version: SNAPSHOT_VERSION,
        state: state.clone(),
    }
}

pub fn apply_snapshot(snapshot: &Snapshot) -> SessionState {
    snapshot.state.clone()
}

/// SHA-256 of the canonical JSON encoding (declaration-ordered fields,
/// key-ordered maps).
pub fn state_digest(state: &SessionState) -> [u8; 32] {
    let bytes = serde_json::to_vec(state).expect("session state serializes");
    Sha256::digest(&bytes).into()
}

pub fn digest_hex(state: &SessionState) -> String {
    hex::encode(state_digest(state))
}
