//! Student locomotion and guidance math, plus the teacher's view controls.
//!
//! Everything here is a pure function of its inputs.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{clamp_teleport, Capsule, Pose, Quat, TeleportOutcome, Vec3};
use crate::scene::{AnatomyScene, WalkBarrier};
use crate::session_state::{Event, StudentMode, StudentState};

pub const DEFAULT_FLY_SPEED: f64 = 2.5;
pub const DEFAULT_BEAM_MIN: f64 = 1.0;
pub const DEFAULT_BEAM_MAX: f64 = 30.0;
pub const DEFAULT_PITCH_CLAMP_DEG: f64 = 85.0;
pub const DEFAULT_STANDOFF: f64 = 3.0;
/// Beam length change per unit touchpad swipe.
pub const BEAM_GAIN: f64 = 0.5;
pub const MAX_FLY_DT: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NavConfig {
    /// m/s
    pub fly_speed: f64,
    pub margin: f64,
    pub beam_min: f64,
    pub beam_max: f64,
    pub pitch_clamp_deg: f64,
    pub standoff: f64,
    pub walk_barrier: WalkBarrier,
    pub capsule_height: f64,
    pub capsule_radius: f64,
}

impl Default for NavConfig {
    fn default() -> Self {
        NavConfig {
            fly_speed: DEFAULT_FLY_SPEED,
            margin: crate::geometry::DEFAULT_MARGIN,
            beam_min: DEFAULT_BEAM_MIN,
            beam_max: DEFAULT_BEAM_MAX,
            pitch_clamp_deg: DEFAULT_PITCH_CLAMP_DEG,
            standoff: DEFAULT_STANDOFF,
            walk_barrier: WalkBarrier::default(),
            capsule_height: crate::geometry::DEFAULT_CAPSULE_HEIGHT,
            capsule_radius: crate::geometry::DEFAULT_CAPSULE_RADIUS,
        }
    }
}

impl NavConfig {
    pub fn validate(&self) -> Result<(), NavError> {
        let positive = [
            ("fly_speed", self.fly_speed),
            ("margin", self.margin),
            ("beam_min", self.beam_min),
            ("beam_max", self.beam_max),
            ("pitch_clamp_deg", self.pitch_clamp_deg),
            ("standoff", self.standoff),
            ("capsule_height", self.capsule_height),
            ("capsule_radius", self.capsule_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(NavError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if self.beam_min > self.beam_max {
            return Err(NavError::InvalidConfig("beam_min exceeds beam_max".into()));
        }
        if self.pitch_clamp_deg >= 90.0 {
            return Err(NavError::InvalidConfig("pitch_clamp_deg must be below 90".into()));
        }
        if !self.walk_barrier.is_valid() {
            return Err(NavError::InvalidConfig("walk barrier is empty".into()));
        }
        Ok(())
    }

    pub fn pitch_clamp(&self) -> f64 {
        self.pitch_clamp_deg.to_radians()
    }

    pub fn capsule_template(&self) -> Capsule {
        Capsule {
            base: Vec3::ZERO,
            height: self.capsule_height,
            radius: self.capsule_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NavError {
    #[error("time step {0} s is outside (0, {MAX_FLY_DT}]")]
    InvalidTimestep(f64),
    #[error("invalid navigation config: {0}")]
    InvalidConfig(String),
    #[error("teleport requires navigation mode")]
    WrongMode,
    #[error("no clear teleport target along the beam")]
    TooClose,
}

/// Advances the platform along the interaction controller's forward axis.
/// Flight ignores geometry.
pub fn free_fly_step(
    platform: &Pose,
    controller: &Pose,
    dt: f64,
    config: &NavConfig,
) -> Result<Pose, NavError> {
    if !(dt > 0.0 && dt <= MAX_FLY_DT) {
        return Err(NavError::InvalidTimestep(dt));
    }
    let dir = controller.forward().try_normalize().unwrap_or(Vec3::ZERO);
    Ok(Pose::new(
        platform.position + dir * (config.fly_speed * dt),
        platform.orientation,
    ))
}

/// Touchpad swipe in [-1, 1] lengthens or shortens the teleport beam.
pub fn adjust_beam(current: f64, swipe_delta: f64, config: &NavConfig) -> f64 {
    let swipe = if swipe_delta.is_finite() {
        swipe_delta.clamp(-1.0, 1.0)
    } else {
        0.0
    };
    (current + swipe * BEAM_GAIN).clamp(config.beam_min, config.beam_max)
}

/// Casts the teleport beam from the interaction (right) controller and turns
/// an accepted target into a `TeleportCommit`.
pub fn teleport(
    student: &StudentState,
    scene: &AnatomyScene,
    config: &NavConfig,
) -> Result<Event, NavError> {
    if student.mode != StudentMode::Navigation {
        return Err(NavError::WrongMode);
    }
    let ray = student.world_right_controller().forward_ray();
    let length = student.beam_length.clamp(config.beam_min, config.beam_max);
    match clamp_teleport(scene.bvh(), &ray, length, config.margin, &config.capsule_template()) {
        Ok(TeleportOutcome::Accepted { target, .. }) => Ok(Event::TeleportCommit { target }),
        _ => Err(NavError::TooClose),
    }
}

/// Projects a tracked position into the walking barrier; height is kept.
pub fn clamp_walk(position: Vec3, barrier: &WalkBarrier) -> Vec3 {
    Vec3::new(
        position.x.clamp(barrier.min_x, barrier.max_x),
        position.y,
        position.z.clamp(barrier.min_z, barrier.max_z),
    )
}

/// Direction to the landmark in the controller's local frame, or `None` when
/// the controller sits on the landmark.
pub fn landmark_arrow(controller: &Pose, landmark: Vec3) -> Option<Vec3> {
    let world = landmark - controller.position;
    if world.length() < 1e-6 {
        return None;
    }
    let local = controller.orientation.conjugate().rotate(world);
    local.try_normalize()
}

/// World pose of the inspection copy, which rides along with the platform.
pub fn inspect_copy_pose(platform: &Pose, local_offset: &Pose) -> Pose {
    platform.compose(local_offset)
}

fn yaw_pitch_toward(dir: Vec3) -> (f64, f64) {
    let horizontal = (dir.x * dir.x + dir.z * dir.z).sqrt();
    ((-dir.x).atan2(-dir.z), dir.y.atan2(horizontal))
}

/// Turns the teacher view toward the student's head and backs off to
/// `standoff` along the resulting view axis. Pitch is clamped; when the clamp
/// engages the view still looks straight at the head.
pub fn focus_on_student(
    teacher_view: &Pose,
    student_head: Vec3,
    standoff: f64,
    config: &NavConfig,
) -> Pose {
    let clamp = config.pitch_clamp();
    let (yaw, pitch) = match (student_head - teacher_view.position).try_normalize() {
        Some(dir) if (student_head - teacher_view.position).length() > 1e-9 => yaw_pitch_toward(dir),
        _ => {
            let (y, p, _) = teacher_view.orientation.yaw_pitch_roll();
            (y, p)
        }
    };
    let orientation = Quat::from_yaw_pitch(yaw, pitch.clamp(-clamp, clamp));
    let forward = orientation.forward();
    Pose::new(student_head - forward * standoff, orientation)
}

/// Mouse-look for the teacher: unbounded yaw, pitch clamped, never any roll.
pub fn rotate_view(view: &Pose, yaw_delta: f64, pitch_delta: f64, config: &NavConfig) -> Pose {
    let clamp = config.pitch_clamp();
    let (yaw, pitch, _) = view.orientation.yaw_pitch_roll();
    let yaw = crate::geometry::wrap_angle(yaw + yaw_delta);
    let pitch = (pitch + pitch_delta).clamp(-clamp, clamp);
    Pose::new(view.position, Quat::from_yaw_pitch(yaw, pitch))
}
