//! Spatial primitives and the queries built on them: ray casting through a
//! BVH, capsule clearance, teleport clamping and tube sweeping.
//!
//! All types are immutable once built and all operations are pure.

mod bvh;
mod math;
mod mesh;
mod teleport;
mod tube;

use thiserror::Error;

pub use bvh::{build_bvh, ray_cast, Bvh};
pub use math::{transform_point, wrap_angle, Pose, Quat, Ray, Vec3};
pub use mesh::{
    closest_point_on_triangle, intersect_triangle, segment_segment_distance_sq,
    segment_triangle_distance, triangle_normal, Aabb, RayHit, TriangleMesh, MIN_TRIANGLE_AREA,
};
pub use teleport::{
    capsule_clear, clamp_teleport, Capsule, TeleportOutcome, TeleportRejection,
    DEFAULT_CAPSULE_HEIGHT, DEFAULT_CAPSULE_RADIUS, DEFAULT_MARGIN,
};
pub use tube::{sweep_tube, Tube, DUPLICATE_EPSILON};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("no geometry to build from")]
    EmptyGeometry,
    #[error("non-finite value")]
    NonFinite,
    #[error("vertex {0} is not finite")]
    NonFiniteVertex(usize),
    #[error("triangle {triangle} references vertex {index} but the mesh has {vertex_count}")]
    IndexOutOfRange {
        triangle: usize,
        index: u32,
        vertex_count: usize,
    },
    #[error("triangle {triangle} is degenerate (area {area:e})")]
    DegenerateTriangle { triangle: usize, area: f64 },
    #[error("direction vector has zero length")]
    ZeroDirection,
    #[error("rotation is not finite or has zero norm")]
    InvalidRotation,
    #[error("capsule needs positive height and radius")]
    InvalidCapsule,
    #[error("length must be positive and finite, got {0}")]
    InvalidLength(f64),
    #[error("stroke has fewer than two distinct points")]
    DegenerateStroke,
    #[error("a tube ring needs at least 3 segments, got {0}")]
    TooFewSegments(usize),
}
