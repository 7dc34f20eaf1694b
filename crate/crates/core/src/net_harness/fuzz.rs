//! Seeded random event streams for property tests. Roughly half the events
//! are valid in the sample scene; the rest exercise every rejection path.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Pose, Quat, Vec3};
use crate::session_state::{
    AnnotationId, Brush, Event, LabelTag, ModeSelection, Role, StudentMode, TeacherTool,
    VisibilityScope,
};

const STRUCTURES: &[&str] = &["canalis_opticus", "cranium", "foramen_ovale_left", "no_such_structure"];

struct Fuzzer {
    rng: ChaCha8Rng,
    ts: [u64; 2],
    epoch: u64,
    next_id: AnnotationId,
}

impl Fuzzer {
    fn point(&mut self) -> Vec3 {
        let x = self.rng.gen_range(-3.0..3.0);
        let z = self.rng.gen_range(-3.0..3.0);
        if self.rng.gen_bool(0.7) {
            Vec3::new(x, 0.0, z)
        } else {
            Vec3::new(x, self.rng.gen_range(0.3..4.0), z)
        }
    }

    fn standing(&mut self) -> Vec3 {
        let p = self.point();
        Vec3::new(p.x, if p.y == 0.0 { 0.05 } else { p.y }, p.z)
    }

    fn pose(&mut self) -> Pose {
        let yaw = self.rng.gen_range(-3.0..3.0);
        let pitch = self.rng.gen_range(-1.0..1.0);
        Pose::new(self.point() + Vec3::Y * 1.5, Quat::from_yaw_pitch(yaw, pitch))
    }

    /// An id that exists, might exist, or is about to be allocated.
    fn id(&mut self) -> AnnotationId {
        self.rng.gen_range(1..self.next_id + 2)
    }

    fn event(&mut self) -> Event {
        match self.rng.gen_range(0..17) {
            0..=3 => {
                let role = if self.rng.gen_bool(0.7) { Role::Student } else { Role::Teacher };
                let slot = role as usize;
                // Occasionally replay an old timestamp.
                self.ts[slot] = if self.rng.gen_bool(0.9) {
                    self.ts[slot] + self.rng.gen_range(1..40)
                } else {
                    self.ts[slot].saturating_sub(5)
                };
                let platform = (role == Role::Student).then(|| Pose::from_position(self.standing()));
                Event::PoseUpdate {
                    role,
                    timestamp_ms: self.ts[slot],
                    head: self.pose(),
                    left: platform.map(|_| Pose::from_position(Vec3::new(-0.2, 1.2, -0.3))),
                    right: platform.map(|_| Pose::from_position(Vec3::new(0.2, 1.2, -0.3))),
                    platform,
                    platform_epoch: self.rng.gen_range(self.epoch.saturating_sub(1)..=self.epoch + 1),
                }
            }
            4 => Event::ModeChange {
                mode: if self.rng.gen_bool(0.5) {
                    ModeSelection::Student(
                        *[StudentMode::Handbook, StudentMode::Navigation, StudentMode::Inspect]
                            .choose(&mut self.rng)
                            .unwrap(),
                    )
                } else {
                    ModeSelection::Teacher(
                        *[TeacherTool::Label, TeacherTool::Sketch, TeacherTool::Landmark, TeacherTool::None]
                            .choose(&mut self.rng)
                            .unwrap(),
                    )
                },
            },
            5 => Event::BeamAdjust { swipe_delta: self.rng.gen_range(-2.0..2.0) },
            6 => {
                self.epoch += 1;
                Event::TeleportCommit { target: self.standing() }
            }
            7 => {
                self.epoch += 1;
                Event::RepositionCommand { target: self.standing() }
            }
            8 => {
                self.next_id += 1;
                Event::LandmarkPlace { position: self.point() }
            }
            9 => {
                self.next_id += 1;
                Event::LabelCreate { anchor: self.point(), normal: Vec3::Y }
            }
            10 => Event::LabelDrag {
                id: self.id(),
                offset_tip: Vec3::new(self.rng.gen_range(-1.0..1.0), self.rng.gen_range(0.0..1.0), 0.2),
            },
            11 => Event::LabelEdit {
                id: self.id(),
                headline: format!("label {}", self.rng.gen_range(0..100)),
                description: String::new(),
                tag: *[LabelTag::Red, LabelTag::Blue, LabelTag::Yellow, LabelTag::None]
                    .choose(&mut self.rng)
                    .unwrap(),
            },
            12 => {
                let id = if self.rng.gen_bool(0.8) { self.next_id } else { self.id() };
                self.next_id = self.next_id.max(id + 1);
                Event::SketchBegin {
                    id,
                    color: [self.rng.gen(), self.rng.gen(), self.rng.gen()],
                    brush: if self.rng.gen_bool(0.5) { Brush::Small } else { Brush::Large },
                }
            }
            13 => {
                let start = self.point() + Vec3::Y;
                let n = self.rng.gen_range(0..6);
                Event::SketchAppend {
                    id: self.id(),
                    points: (0..n).map(|i| start + Vec3::X * (0.01 * i as f64)).collect(),
                }
            }
            14 => {
                if self.rng.gen_bool(0.8) {
                    Event::SketchEnd { id: self.id() }
                } else {
                    Event::SketchDelete { id: self.id() }
                }
            }
            15 => Event::VisibilitySet {
                scope: if self.rng.gen_bool(0.3) {
                    VisibilityScope::All
                } else {
                    VisibilityScope::Annotation(self.id())
                },
                visible: self.rng.gen_bool(0.5),
            },
            _ => match self.rng.gen_range(0..3) {
                0 => Event::InspectSelect {
                    structure_id: STRUCTURES.choose(&mut self.rng).unwrap().to_string(),
                },
                1 => Event::InspectRelease,
                _ => Event::HapticCue { role: Role::Student, pattern: "pulse".into() },
            },
        }
    }
}

/// `count` events drawn from seed `seed`. Same seed, same events.
pub fn random_events(seed: u64, count: usize) -> Vec<Event> {
    let mut f = Fuzzer {
        rng: ChaCha8Rng::seed_from_u64(seed),
        ts: [0, 0],
        epoch: 0,
        next_id: 1,
    };
    (0..count).map(|_| f.event()).collect()
}
