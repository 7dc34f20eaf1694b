//! Sweeps a circular cross-section along a sketch centerline.

use std::f64::consts::TAU;

use super::math::{Quat, Vec3};
use super::mesh::TriangleMesh;
use super::GeometryError;

/// Consecutive centerline points closer than this are merged.
pub const DUPLICATE_EPSILON: f64 = 1e-7;

/// Tube surface plus per-vertex unit normals.
#[derive(Clone, Debug)]
pub struct Tube {
    pub mesh: TriangleMesh,
    pub normals: Vec<Vec3>,
    /// Ring frame (normal, binormal) per surviving centerline point.
    pub frames: Vec<(Vec3, Vec3)>,
    /// Centerline after duplicate removal.
    pub centerline: Vec<Vec3>,
}

/// Builds a closed tube: `P·R` ring vertices followed by the start and end cap
/// centers. Ring frames are carried along by parallel transport.
pub fn sweep_tube(
    centerline: &[Vec3],
    radius: f64,
    ring_segments: usize,
) -> Result<Tube, GeometryError> {
    if ring_segments < 3 {
        return Err(GeometryError::TooFewSegments(ring_segments));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(GeometryError::InvalidLength(radius));
    }
    if centerline.iter().any(|p| !p.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let mut points: Vec<Vec3> = Vec::with_capacity(centerline.len());
    for &p in centerline {
        if points.last().is_none_or(|&q: &Vec3| q.distance(p) >= DUPLICATE_EPSILON) {
            points.push(p);
        }
    }
    if points.len() < 2 {
        return Err(GeometryError::DegenerateStroke);
    }

    let n = points.len();
    let segment_dir = |i: usize| (points[i + 1] - points[i]).try_normalize().unwrap();
    let tangents: Vec<Vec3> = (0..n)
        .map(|i| {
            if i == 0 {
                segment_dir(0)
            } else if i == n - 1 {
                segment_dir(n - 2)
            } else {
                // Bisector; falls back to the incoming segment on a reversal.
                (segment_dir(i - 1) + segment_dir(i))
                    .try_normalize()
                    .unwrap_or_else(|| segment_dir(i - 1))
            }
        })
        .collect();

    let mut frames = Vec::with_capacity(n);
    let mut normal = tangents[0].any_perpendicular();
    for i in 0..n {
        if i > 0 {
            let q = Quat::from_to(tangents[i - 1], tangents[i]);
            normal = q.rotate(normal);
            // Re-orthogonalize against drift.
            normal = (normal - tangents[i] * normal.dot(tangents[i]))
                .try_normalize()
                .unwrap_or_else(|| tangents[i].any_perpendicular());
        }
        let binormal = tangents[i].cross(normal);
        frames.push((normal, binormal));
    }

    let r = ring_segments;
    let mut vertices = Vec::with_capacity(n * r + 2);
    let mut normals = Vec::with_capacity(n * r + 2);
    for (i, &(nrm, bin)) in frames.iter().enumerate() {
        for k in 0..r {
            let a = TAU * k as f64 / r as f64;
            let dir = nrm * a.cos() + bin * a.sin();
            vertices.push(points[i] + dir * radius);
            normals.push(dir.try_normalize().unwrap_or(nrm));
        }
    }
    let start_cap = vertices.len() as u32;
    vertices.push(points[0]);
    normals.push(-tangents[0]);
    let end_cap = vertices.len() as u32;
    vertices.push(points[n - 1]);
    normals.push(tangents[n - 1]);

    let ring = |i: usize, k: usize| (i * r + k % r) as u32;
    let mut triangles = Vec::with_capacity(2 * r * (n - 1) + 2 * r);
    for i in 0..n - 1 {
        for k in 0..r {
            let (a, b, c, d) = (ring(i, k), ring(i, k + 1), ring(i + 1, k), ring(i + 1, k + 1));
            triangles.push([a, b, d]);
            triangles.push([a, d, c]);
        }
    }
    for k in 0..r {
        triangles.push([start_cap, ring(0, k + 1), ring(0, k)]);
        triangles.push([end_cap, ring(n - 1, k), ring(n - 1, k + 1)]);
    }

    let mesh = TriangleMesh::new("sketch", vertices, triangles)?;
    Ok(Tube {
        mesh,
        normals,
        frames,
        centerline: points,
    })
}
