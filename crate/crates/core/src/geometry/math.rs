//! Vectors, quaternions, poses and rays.
//!
//! Convention: right-handed, y-up, meters. A pose's forward axis is local -z.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use super::GeometryError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const X: Vec3 = Vec3::new(1.0, 0.0, 0.0);
    pub const Y: Vec3 = Vec3::new(0.0, 1.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn length_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn length(self) -> f64 {
        self.length_squared().sqrt()
    }

    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).length()
    }

    /// Unit vector in the same direction, or `None` for (near) zero vectors.
    pub fn try_normalize(self) -> Option<Vec3> {
        let len = self.length();
        if len > 1e-12 && len.is_finite() {
            Some(self / len)
        } else {
            None
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn min(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn lerp(self, o: Vec3, t: f64) -> Vec3 {
        self + (o - self) * t
    }

    pub fn axis(self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    /// Some unit vector perpendicular to `self` (which must be non-zero).
    pub fn any_perpendicular(self) -> Vec3 {
        let a = Vec3::new(self.x.abs(), self.y.abs(), self.z.abs());
        let helper = if a.x <= a.y && a.x <= a.z {
            Vec3::X
        } else if a.y <= a.z {
            Vec3::Y
        } else {
            Vec3::Z
        };
        self.cross(helper)
            .try_normalize()
            .expect("perpendicular of a non-zero vector")
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Rotation quaternion. Constructors and composition renormalize, so the
/// norm stays within 1e-6 of one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
}

impl Default for Quat {
    fn default() -> Self {
        Quat::IDENTITY
    }
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        x: 0.0,
        y: 0.0,
        z: 0.0,
        w: 1.0,
    };

    /// Builds a quaternion from raw components, normalizing it.
    pub fn new(x: f64, y: f64, z: f64, w: f64) -> Result<Quat, GeometryError> {
        let q = Quat { x, y, z, w };
        let n = q.norm();
        if !n.is_finite() || n < 1e-12 {
            return Err(GeometryError::InvalidRotation);
        }
        Ok(Quat {
            x: x / n,
            y: y / n,
            z: z / n,
            w: w / n,
        })
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Quat, GeometryError> {
        let axis = axis.try_normalize().ok_or(GeometryError::InvalidRotation)?;
        let (s, c) = (angle * 0.5).sin_cos();
        Quat::new(axis.x * s, axis.y * s, axis.z * s, c)
    }

    /// Rotation about +y.
    pub fn from_yaw(yaw: f64) -> Quat {
        let (s, c) = (yaw * 0.5).sin_cos();
        Quat {
            x: 0.0,
            y: s,
            z: 0.0,
            w: c,
        }
    }

    /// Rotation about +x.
    pub fn from_pitch(pitch: f64) -> Quat {
        let (s, c) = (pitch * 0.5).sin_cos();
        Quat {
            x: s,
            y: 0.0,
            z: 0.0,
            w: c,
        }
    }

    /// Roll-free orientation: yaw about world +y, then pitch about the local +x.
    pub fn from_yaw_pitch(yaw: f64, pitch: f64) -> Quat {
        Quat::from_yaw(yaw).mul(Quat::from_pitch(pitch))
    }

    /// Shortest rotation taking unit vector `from` onto unit vector `to`.
    pub fn from_to(from: Vec3, to: Vec3) -> Quat {
        let d = from.dot(to).clamp(-1.0, 1.0);
        if d > 1.0 - 1e-15 {
            return Quat::IDENTITY;
        }
        if d < -1.0 + 1e-15 {
            let axis = from.any_perpendicular();
            return Quat::from_axis_angle(axis, std::f64::consts::PI).unwrap_or(Quat::IDENTITY);
        }
        let axis = from.cross(to);
        Quat::new(axis.x, axis.y, axis.z, 1.0 + d).unwrap_or(Quat::IDENTITY)
    }

    pub fn norm(self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z + self.w * self.w).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.w.is_finite()
    }

    pub fn is_unit(self) -> bool {
        self.is_finite() && (self.norm() - 1.0).abs() <= 1e-6
    }

    pub fn conjugate(self) -> Quat {
        Quat {
            x: -self.x,
            y: -self.y,
            z: -self.z,
            w: self.w,
        }
    }

    /// Hamilton product `self * o` (apply `o` first), renormalized.
    #[allow(clippy::should_implement_trait)]
    pub fn mul(self, o: Quat) -> Quat {
        let q = Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        };
        let n = q.norm();
        Quat {
            x: q.x / n,
            y: q.y / n,
            z: q.z / n,
            w: q.w / n,
        }
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    /// Local -z in world space.
    pub fn forward(self) -> Vec3 {
        self.rotate(Vec3::new(0.0, 0.0, -1.0))
    }

    pub fn up(self) -> Vec3 {
        self.rotate(Vec3::Y)
    }

    pub fn right(self) -> Vec3 {
        self.rotate(Vec3::X)
    }

    /// Angle of the rotation between two orientations, in radians.
    pub fn angle_to(self, o: Quat) -> f64 {
        let d = (self.x * o.x + self.y * o.y + self.z * o.z + self.w * o.w).abs();
        2.0 * d.min(1.0).acos()
    }

    /// Yaw/pitch/roll (radians) of this orientation, matching
    /// `from_yaw_pitch` with an extra roll about the local -z axis.
    pub fn yaw_pitch_roll(self) -> (f64, f64, f64) {
        let f = self.forward();
        let pitch = f.y.clamp(-1.0, 1.0).asin();
        let horizontal = (f.x * f.x + f.z * f.z).sqrt();
        let yaw = if horizontal > 1e-12 {
            (-f.x).atan2(-f.z)
        } else {
            // Looking straight up or down: recover yaw from the up vector.
            let u = self.up() * f.y.signum();
            u.x.atan2(u.z)
        };
        let no_roll = Quat::from_yaw_pitch(yaw, pitch);
        let r = no_roll.conjugate().mul(self);
        // Remaining rotation is about local z.
        let roll = 2.0 * r.z.atan2(r.w);
        let roll = wrap_angle(roll);
        (wrap_angle(yaw), pitch, roll)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vec3,
    pub orientation: Quat,
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        position: Vec3::ZERO,
        orientation: Quat::IDENTITY,
    };

    pub fn new(position: Vec3, orientation: Quat) -> Self {
        Pose {
            position,
            orientation,
        }
    }

    pub fn from_position(position: Vec3) -> Self {
        Pose::new(position, Quat::IDENTITY)
    }

    pub fn is_valid(&self) -> bool {
        self.position.is_finite() && self.orientation.is_unit()
    }

    /// Rotation then translation.
    pub fn transform_point(&self, local: Vec3) -> Vec3 {
        self.orientation.rotate(local) + self.position
    }

    pub fn transform_vector(&self, local: Vec3) -> Vec3 {
        self.orientation.rotate(local)
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.conjugate();
        Pose::new(-inv.rotate(self.position), inv)
    }

    /// `self ∘ child`: `child` expressed in this pose's frame, mapped to world.
    pub fn compose(&self, child: &Pose) -> Pose {
        Pose::new(
            self.transform_point(child.position),
            self.orientation.mul(child.orientation),
        )
    }

    pub fn forward(&self) -> Vec3 {
        self.orientation.forward()
    }

    /// Ray along this pose's forward axis.
    pub fn forward_ray(&self) -> Ray {
        Ray {
            origin: self.position,
            direction: self.forward().try_normalize().unwrap_or(Vec3::new(0.0, 0.0, -1.0)),
        }
    }
}

/// Transforms a local point by a pose.
pub fn transform_point(pose: &Pose, local: Vec3) -> Vec3 {
    pose.transform_point(local)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    /// Normalizes `direction`; fails on zero or non-finite input.
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Ray, GeometryError> {
        if !origin.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        let direction = direction.try_normalize().ok_or(GeometryError::ZeroDirection)?;
        Ok(Ray { origin, direction })
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        a.distance(b) <= tol
    }

    #[test]
    fn identity_transform() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(transform_point(&Pose::IDENTITY, p), p);
    }

    #[test]
    fn quarter_yaw_maps_x_to_minus_z() {
        let pose = Pose::new(Vec3::ZERO, Quat::from_yaw(FRAC_PI_2));
        let out = transform_point(&pose, Vec3::X);
        assert!(close(out, Vec3::new(0.0, 0.0, -1.0), 1e-12), "{out:?}");
    }

    #[test]
    fn pose_inverse_round_trip() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let axis = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let q = Quat::from_axis_angle(axis, rng.gen_range(-PI..PI)).unwrap();
            let pose = Pose::new(Vec3::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)), q);
            let p = Vec3::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
            let back = pose.inverse().transform_point(pose.transform_point(p));
            assert!(close(back, p, 1e-9));
            let ident = pose.compose(&pose.inverse());
            assert!(ident.position.length() < 1e-9);
        }
    }

    #[test]
    fn quaternion_norm_survives_long_chains() {
        let step = Quat::from_axis_angle(Vec3::new(0.3, 1.0, -0.2), 0.0123).unwrap();
        let mut q = Quat::IDENTITY;
        for _ in 0..10_000 {
            q = q.mul(step);
            assert!((q.norm() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn yaw_pitch_roll_round_trip() {
        for &(yaw, pitch) in &[(0.3, 0.2), (-2.0, -1.2), (3.0, 1.4), (0.0, 0.0)] {
            let q = Quat::from_yaw_pitch(yaw, pitch);
            let (y, p, r) = q.yaw_pitch_roll();
            assert!((wrap_angle(y - yaw)).abs() < 1e-9);
            assert!((p - pitch).abs() < 1e-9);
            assert!(r.abs() < 1e-9);
        }
    }

    #[test]
    fn ray_rejects_zero_direction() {
        assert_eq!(Ray::new(Vec3::ZERO, Vec3::ZERO), Err(GeometryError::ZeroDirection));
        let r = Ray::new(Vec3::ZERO, Vec3::new(0.0, 3.0, 4.0)).unwrap();
        assert!((r.direction.length() - 1.0).abs() < 1e-12);
    }
}
