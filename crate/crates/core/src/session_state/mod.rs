//! Event-sourced authoritative model of the shared environment.
//!
//! [`apply_event`] is the only way state changes. It is a pure function, so
//! replaying a log from [`SessionState::default`] always lands on the same
//! [`state_digest`].

mod event;
mod model;
mod reducer;

pub use event::{
    DerivedEffect, Event, ModeSelection, RejectReason, VisibilityScope, EVENT_KINDS,
};
pub use model::*;
pub use reducer::{
    apply_event, apply_snapshot, create_label_workflow, digest_hex, reposition_student, snapshot,
    state_digest, Applied, LabelDraft, ReducerContext, Snapshot, SNAPSHOT_VERSION,
};

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::{Pose, Quat, Ray, Vec3};
    use crate::navigation::NavConfig;
    use crate::scene::{AnatomyScene, SceneConfig};

    fn ctx() -> ReducerContext {
        ReducerContext::new(
            Arc::new(AnatomyScene::sample(&SceneConfig::default())),
            NavConfig::default(),
        )
    }

    fn apply(s: &SessionState, e: Event, c: &ReducerContext) -> SessionState {
        apply_event(s, &e, c).unwrap().0
    }

    fn floor(x: f64, z: f64) -> Vec3 {
        Vec3::new(x, 0.0, z)
    }

    #[test]
    fn landmark_place_emits_haptic_cue() {
        let c = ctx();
        let (s, fx) = apply_event(
            &SessionState::default(),
            &Event::LandmarkPlace { position: floor(1.0, 0.5) },
            &c,
        )
        .unwrap();
        assert_eq!(s.landmarks.len(), 1);
        assert!(s.active_landmark().is_some());
        assert_eq!(
            fx,
            vec![DerivedEffect::HapticCue { role: Role::Student, pattern: "landmark".into() }]
        );
    }

    #[test]
    fn second_landmark_deactivates_first() {
        let c = ctx();
        let s = apply(&SessionState::default(), Event::LandmarkPlace { position: floor(1.0, 0.5) }, &c);
        let s = apply(&s, Event::LandmarkPlace { position: floor(-1.0, 0.5) }, &c);
        assert_eq!(s.landmarks.len(), 2);
        assert!(!s.landmarks[&1].active);
        assert!(s.landmarks[&2].active);
    }

    #[test]
    fn off_surface_landmark_rejected() {
        let c = ctx();
        let s = SessionState::default();
        let err = apply_event(&s, &Event::LandmarkPlace { position: Vec3::new(0.0, 1.0, 0.0) }, &c)
            .unwrap_err();
        assert_eq!(err, RejectReason::OffSurface);
    }

    #[test]
    fn append_to_closed_sketch_rejected() {
        let c = ctx();
        let s = apply(
            &SessionState::default(),
            Event::SketchBegin { id: 1, color: [255, 0, 0], brush: Brush::Small },
            &c,
        );
        let s = apply(&s, Event::SketchAppend { id: 1, points: vec![Vec3::ZERO, Vec3::X] }, &c);
        let s = apply(&s, Event::SketchEnd { id: 1 }, &c);
        let before = state_digest(&s);
        let err = apply_event(&s, &Event::SketchAppend { id: 1, points: vec![Vec3::Y] }, &c).unwrap_err();
        assert_eq!(err, RejectReason::SketchClosed);
        assert_eq!(state_digest(&s), before);
    }

    #[test]
    fn sketch_decimation_and_ids() {
        let c = ctx();
        let s = apply(
            &SessionState::default(),
            Event::SketchBegin { id: 5, color: [0, 0, 0], brush: Brush::Large },
            &c,
        );
        assert_eq!(s.next_id, 6);
        let pts = vec![Vec3::ZERO, Vec3::new(0.0005, 0.0, 0.0), Vec3::new(0.002, 0.0, 0.0)];
        let s = apply(&s, Event::SketchAppend { id: 5, points: pts }, &c);
        assert_eq!(s.sketches[&5].points.len(), 2);
        let err = apply_event(&s, &Event::SketchBegin { id: 5, color: [0; 3], brush: Brush::Small }, &c)
            .unwrap_err();
        assert_eq!(err, RejectReason::IdInUse);
        let s = apply(&s, Event::SketchDelete { id: 5 }, &c);
        assert!(s.sketches.is_empty());
        assert_eq!(
            apply_event(&s, &Event::SketchBegin { id: 5, color: [0; 3], brush: Brush::Small }, &c)
                .unwrap_err(),
            RejectReason::IdInUse
        );
    }

    fn floor_hit(c: &ReducerContext) -> crate::geometry::RayHit {
        let ray = Ray::new(Vec3::new(0.5, 1.7, 0.5), Vec3::new(0.2, -1.0, 0.1)).unwrap();
        c.scene.pick_structure(&ray).unwrap().0
    }

    #[test]
    fn label_three_step_workflow() {
        let c = ctx();
        let hit = floor_hit(&c);
        let s0 = SessionState::default();
        let draft = create_label_workflow(&s0, &hit);
        let s = apply(&s0, draft.create.clone(), &c);
        assert!(s.labels[&draft.id].visible);
        let tip = hit.point + Vec3::new(0.3, 0.5, 0.0);
        let s = apply(&s, draft.drag(tip), &c);
        let s = apply(&s, draft.edit("Foramen ovale", "Passage for the mandibular nerve", LabelTag::Yellow), &c);
        let label = &s.labels[&draft.id];
        assert_eq!(label.tag, LabelTag::Yellow);
        assert_eq!(label.headline, "Foramen ovale");
        assert_eq!(label.offset_tip, tip);
    }

    #[test]
    fn label_default_tip_follows_normal() {
        let c = ctx();
        let hit = floor_hit(&c);
        let draft = create_label_workflow(&SessionState::default(), &hit);
        let s = apply(&SessionState::default(), draft.create.clone(), &c);
        let s = apply(&s, draft.edit("x", "", LabelTag::None), &c);
        // The floor normal facing the viewer is +y.
        let expected = hit.point + Vec3::Y * 0.2;
        assert!(s.labels[&draft.id].offset_tip.distance(expected) < 1e-12);
    }

    #[test]
    fn label_errors() {
        let c = ctx();
        let s = SessionState::default();
        assert_eq!(
            apply_event(&s, &Event::LabelDrag { id: 9, offset_tip: Vec3::ZERO }, &c).unwrap_err(),
            RejectReason::NotFound
        );
        let draft = create_label_workflow(&s, &floor_hit(&c));
        let s = apply(&s, draft.create.clone(), &c);
        let long = "x".repeat(300);
        assert_eq!(
            apply_event(&s, &draft.edit(&long, "", LabelTag::Red), &c).unwrap_err(),
            RejectReason::HeadlineTooLong
        );
    }

    #[test]
    fn reposition_is_one_discrete_step() {
        let c = ctx();
        let s = SessionState::default();
        let target = Vec3::new(1.0, 0.05, -1.0);
        let ev = reposition_student(&s, &c, target).unwrap();
        let s2 = apply(&s, ev, &c);
        assert_eq!(s2.student.platform.position, target);
        assert_eq!(s2.student.platform_epoch, 1);
        // Inside the dome wall.
        assert_eq!(
            reposition_student(&s, &c, Vec3::new(4.0, 0.05, 0.0)).unwrap_err(),
            RejectReason::TargetObstructed
        );
    }

    #[test]
    fn stale_epoch_platform_is_ignored() {
        let c = ctx();
        let s = apply(&SessionState::default(), Event::RepositionCommand { target: Vec3::new(1.0, 0.05, 1.0) }, &c);
        let pose = Event::PoseUpdate {
            role: Role::Student,
            timestamp_ms: 10,
            head: Pose::from_position(Vec3::new(0.1, 1.6, 0.0)),
            left: None,
            right: None,
            platform: Some(Pose::from_position(Vec3::new(0.5, 0.0, 0.5))),
            platform_epoch: 0,
        };
        let s2 = apply(&s, pose, &c);
        assert_eq!(s2.student.platform.position, Vec3::new(1.0, 0.05, 1.0));
        assert_eq!(s2.student.head.position, Vec3::new(0.1, 1.6, 0.0));
    }

    #[test]
    fn pose_timestamps_must_increase() {
        let c = ctx();
        let pose = |t| Event::PoseUpdate {
            role: Role::Teacher,
            timestamp_ms: t,
            head: Pose::new(Vec3::new(0.0, 5.0, 5.0), Quat::from_yaw_pitch(0.0, -0.4)),
            left: None,
            right: None,
            platform: None,
            platform_epoch: 0,
        };
        let s = apply(&SessionState::default(), pose(5), &c);
        assert_eq!(apply_event(&s, &pose(5), &c).unwrap_err(), RejectReason::StalePose);
        let steep = Event::PoseUpdate {
            role: Role::Teacher,
            timestamp_ms: 6,
            head: Pose::new(Vec3::ZERO, Quat::from_yaw_pitch(0.0, -1.55)),
            left: None,
            right: None,
            platform: None,
            platform_epoch: 0,
        };
        assert_eq!(apply_event(&s, &steep, &c).unwrap_err(), RejectReason::PitchOutOfRange);
    }

    #[test]
    fn teleport_needs_navigation_mode() {
        let c = ctx();
        let s = apply(
            &SessionState::default(),
            Event::ModeChange { mode: ModeSelection::Student(StudentMode::Handbook) },
            &c,
        );
        assert_eq!(
            apply_event(&s, &Event::TeleportCommit { target: Vec3::new(0.0, 0.1, 0.0) }, &c).unwrap_err(),
            RejectReason::WrongMode
        );
    }

    #[test]
    fn inspect_selection() {
        let c = ctx();
        let s = SessionState::default();
        let sel = Event::InspectSelect { structure_id: "canalis_opticus".into() };
        assert_eq!(apply_event(&s, &sel, &c).unwrap_err(), RejectReason::WrongMode);
        let s = apply(&s, Event::ModeChange { mode: ModeSelection::Student(StudentMode::Inspect) }, &c);
        let bad = Event::InspectSelect { structure_id: "nope".into() };
        assert_eq!(apply_event(&s, &bad, &c).unwrap_err(), RejectReason::UnknownStructure);
        let s = apply(&s, sel, &c);
        assert_eq!(s.student.inspect_copy.as_ref().unwrap().structure_id, "canalis_opticus");
        let s = apply(&s, Event::InspectRelease, &c);
        assert!(s.student.inspect_copy.is_none());
    }

    #[test]
    fn visibility_scopes() {
        let c = ctx();
        let s = apply(&SessionState::default(), Event::VisibilitySet { scope: VisibilityScope::All, visible: false }, &c);
        assert!(!s.teacher.annotations_shown);
        let s = apply(&s, Event::LandmarkPlace { position: floor(1.0, 1.0) }, &c);
        let hide_landmark = Event::VisibilitySet { scope: VisibilityScope::Annotation(1), visible: false };
        assert_eq!(apply_event(&s, &hide_landmark, &c).unwrap_err(), RejectReason::NotHideable);
        let s = apply(&s, Event::SketchBegin { id: 2, color: [0; 3], brush: Brush::Small }, &c);
        let s = apply(&s, Event::VisibilitySet { scope: VisibilityScope::Annotation(2), visible: false }, &c);
        assert!(!s.sketches[&2].visible);
    }

    #[test]
    fn snapshot_round_trip_and_digest() {
        let c = ctx();
        let empty = SessionState::default();
        let json = serde_json::to_string(&snapshot(&empty)).unwrap();
        let back: Snapshot = serde_json::from_str(&json).unwrap();
        assert_eq!(state_digest(&apply_snapshot(&back)), state_digest(&empty));
        let s = apply(&empty, Event::HapticCue { role: Role::Student, pattern: "buzz".into() }, &c);
        assert_ne!(state_digest(&s), state_digest(&empty));
    }
}
