//! Capsule clearance and teleport beam clamping.

use serde::{Deserialize, Serialize};

use super::bvh::Bvh;
use super::math::{Ray, Vec3};
use super::GeometryError;

pub const DEFAULT_MARGIN: f64 = 0.5;
pub const DEFAULT_CAPSULE_RADIUS: f64 = 0.3;
pub const DEFAULT_CAPSULE_HEIGHT: f64 = 1.8;

/// Upright capsule standing on `base`. The axis segment runs from
/// `base + radius·y` to `base + (height - radius)·y`, collapsing to a point
/// when `height < 2·radius`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Capsule {
    pub base: Vec3,
    pub height: f64,
    pub radius: f64,
}

impl Default for Capsule {
    fn default() -> Self {
        Capsule {
            base: Vec3::ZERO,
            height: DEFAULT_CAPSULE_HEIGHT,
            radius: DEFAULT_CAPSULE_RADIUS,
        }
    }
}

impl Capsule {
    pub fn new(base: Vec3, height: f64, radius: f64) -> Result<Self, GeometryError> {
        if !base.is_finite() || !(height > 0.0) || !(radius > 0.0) || !height.is_finite() || !radius.is_finite() {
            return Err(GeometryError::InvalidCapsule);
        }
        Ok(Capsule {
            base,
            height,
            radius,
        })
    }

    pub fn at(&self, base: Vec3) -> Capsule {
        Capsule { base, ..*self }
    }

    pub fn axis_segment(&self) -> (Vec3, Vec3) {
        let lo = self.radius.min(self.height * 0.5);
        let hi = (self.height - self.radius).max(lo);
        (self.base + Vec3::Y * lo, self.base + Vec3::Y * hi)
    }
}

/// True iff no triangle comes closer than `capsule.radius` to the capsule
/// axis. Touching at exactly the radius counts as clear.
pub fn capsule_clear(bvh: &Bvh, capsule: &Capsule) -> bool {
    let (p, q) = capsule.axis_segment();
    !bvh.segment_within(p, q, capsule.radius)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeleportRejection {
    TooClose,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TeleportOutcome {
    Accepted {
        /// Capsule base position at the effective beam tip.
        target: Vec3,
        /// Effective beam length, never above the desired length.
        length: f64,
    },
    Rejected(TeleportRejection),
}

impl TeleportOutcome {
    pub fn target(&self) -> Option<Vec3> {
        match self {
            TeleportOutcome::Accepted { target, .. } => Some(*target),
            TeleportOutcome::Rejected(_) => None,
        }
    }
}

/// Shortens the teleport beam so the target keeps `margin` from the first
/// surface it hits, then backs off in `margin / 2` steps until the capsule
/// fits. Mid-air targets are fine.
pub fn clamp_teleport(
    bvh: &Bvh,
    ray: &Ray,
    desired_length: f64,
    margin: f64,
    capsule_template: &Capsule,
) -> Result<TeleportOutcome, GeometryError> {
    if !(desired_length > 0.0) || !desired_length.is_finite() {
        return Err(GeometryError::InvalidLength(desired_length));
    }
    if !(margin > 0.0) || !margin.is_finite() {
        return Err(GeometryError::InvalidLength(margin));
    }
    let mut length = match bvh.ray_cast(ray, desired_length + margin) {
        Some(hit) if hit.distance < desired_length + margin => hit.distance - margin,
        _ => desired_length,
    };
    let step = margin * 0.5;
    while length > 0.0 {
        let target = ray.at(length);
        if capsule_clear(bvh, &capsule_template.at(target)) {
            return Ok(TeleportOutcome::Accepted { target, length });
        }
        if length <= margin {
            break;
        }
        length -= step;
    }
    Ok(TeleportOutcome::Rejected(TeleportRejection::TooClose))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_bvh, TriangleMesh};

    fn wall_x5() -> Bvh {
        let v = vec![
            Vec3::new(5.0, -10.0, -10.0),
            Vec3::new(5.0, 10.0, -10.0),
            Vec3::new(5.0, 10.0, 10.0),
            Vec3::new(5.0, -10.0, 10.0),
        ];
        build_bvh(&[TriangleMesh::new("wall", v, vec![[0, 1, 2], [0, 2, 3]]).unwrap()]).unwrap()
    }

    fn unit_cube() -> Bvh {
        let mut v = Vec::new();
        for i in 0..8 {
            v.push(Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64));
        }
        let faces = [
            [0, 1, 3, 2],
            [4, 6, 7, 5],
            [0, 4, 5, 1],
            [2, 3, 7, 6],
            [0, 2, 6, 4],
            [1, 5, 7, 3],
        ];
        let tris = faces
            .iter()
            .flat_map(|f| [[f[0], f[1], f[2]], [f[0], f[2], f[3]]])
            .collect();
        build_bvh(&[TriangleMesh::new("cube", v, tris).unwrap()]).unwrap()
    }

    #[test]
    fn clamps_before_wall() {
        let bvh = wall_x5();
        let ray = Ray::new(Vec3::ZERO, Vec3::X).unwrap();
        let out = clamp_teleport(&bvh, &ray, 10.0, 0.5, &Capsule::default()).unwrap();
        assert_eq!(out, TeleportOutcome::Accepted { target: Vec3::new(4.5, 0.0, 0.0), length: 4.5 });
    }

    #[test]
    fn short_beam_is_not_clamped() {
        let bvh = wall_x5();
        let ray = Ray::new(Vec3::ZERO, Vec3::X).unwrap();
        let out = clamp_teleport(&bvh, &ray, 3.0, 0.5, &Capsule::default()).unwrap();
        assert_eq!(out.target(), Some(Vec3::new(3.0, 0.0, 0.0)));
    }

    #[test]
    fn rejects_bad_lengths() {
        let bvh = wall_x5();
        let ray = Ray::new(Vec3::ZERO, Vec3::X).unwrap();
        assert!(clamp_teleport(&bvh, &ray, 0.0, 0.5, &Capsule::default()).is_err());
        assert!(clamp_teleport(&bvh, &ray, 1.0, -0.5, &Capsule::default()).is_err());
    }

    #[test]
    fn capsule_against_cube() {
        let bvh = unit_cube();
        let far = Capsule::new(Vec3::new(5.0, 0.0, 5.0), 1.8, 0.3).unwrap();
        assert!(capsule_clear(&bvh, &far));
        let through = Capsule::new(Vec3::new(0.5, -0.5, 0.5), 1.8, 0.3).unwrap();
        assert!(!capsule_clear(&bvh, &through));
        // Standing inside the cube, away from all faces.
        let inside = Capsule::new(Vec3::new(0.5, 0.35, 0.5), 0.3, 0.1).unwrap();
        assert!(capsule_clear(&bvh, &inside));
    }

    #[test]
    fn capsule_validation() {
        assert!(Capsule::new(Vec3::ZERO, 0.0, 0.3).is_err());
        assert!(Capsule::new(Vec3::ZERO, 1.0, -1.0).is_err());
        let c = Capsule::new(Vec3::ZERO, 0.4, 0.3).unwrap();
        let (p, q) = c.axis_segment();
        assert_eq!(p, q);
        assert_eq!(p, Vec3::new(0.0, 0.2, 0.0));
    }
}
