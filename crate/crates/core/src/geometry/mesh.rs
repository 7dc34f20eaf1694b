use serde::{Deserialize, Serialize};

use super::math::{Ray, Vec3};
use super::GeometryError;

/// Triangles below this area are rejected when a mesh is built.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

/// Indexed triangle mesh belonging to one named structure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    structure_id: String,
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn new(
        structure_id: impl Into<String>,
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
    ) -> Result<Self, GeometryError> {
        let structure_id = structure_id.into();
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(GeometryError::NonFiniteVertex(i));
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &i in tri {
                if i as usize >= vertices.len() {
                    return Err(GeometryError::IndexOutOfRange {
                        triangle: t,
                        index: i,
                        vertex_count: vertices.len(),
                    });
                }
            }
            let [a, b, c] = tri.map(|i| vertices[i as usize]);
            let area = 0.5 * (b - a).cross(c - a).length();
            if area < MIN_TRIANGLE_AREA {
                return Err(GeometryError::DegenerateTriangle { triangle: t, area });
            }
        }
        Ok(TriangleMesh {
            structure_id,
            vertices,
            triangles,
        })
    }

    pub fn structure_id(&self) -> &str {
        &self.structure_id
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        self.triangles[i].map(|v| self.vertices[v as usize])
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Same mesh with every vertex multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self, GeometryError> {
        TriangleMesh::new(
            self.structure_id.clone(),
            self.vertices.iter().map(|v| *v * factor).collect(),
            self.triangles.clone(),
        )
    }
}

/// Nearest intersection of a ray with scene geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RayHit {
    pub distance: f64,
    pub point: Vec3,
    /// Unit geometric normal, oriented against the ray direction.
    pub normal: Vec3,
    pub structure_id: String,
    /// Index of the triangle within its mesh.
    pub triangle_index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub const EMPTY: Aabb = Aabb {
        min: Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
        max: Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
    };

    pub fn from_triangle(t: &[Vec3; 3]) -> Aabb {
        Aabb {
            min: t[0].min(t[1]).min(t[2]),
            max: t[0].max(t[1]).max(t[2]),
        }
    }

    pub fn union(self, o: Aabb) -> Aabb {
        Aabb {
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }

    pub fn grow(self, p: Vec3) -> Aabb {
        Aabb {
            min: self.min.min(p),
            max: self.max.max(p),
        }
    }

    pub fn contains(&self, o: &Aabb) -> bool {
        self.min.x <= o.min.x
            && self.min.y <= o.min.y
            && self.min.z <= o.min.z
            && self.max.x >= o.max.x
            && self.max.y >= o.max.y
            && self.max.z >= o.max.z
    }

    /// Expanded by `pad` on every side.
    pub fn padded(self, pad: f64) -> Aabb {
        let p = Vec3::new(pad, pad, pad);
        Aabb {
            min: self.min - p,
            max: self.max + p,
        }
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// Parametric entry distance of `ray` into the box, if it enters within
    /// `[0, max_t]`.
    pub fn ray_entry(&self, ray: &Ray, max_t: f64) -> Option<f64> {
        let mut t0 = 0.0_f64;
        let mut t1 = max_t;
        for axis in 0..3 {
            let o = ray.origin.axis(axis);
            let d = ray.direction.axis(axis);
            let (lo, hi) = (self.min.axis(axis), self.max.axis(axis));
            if d.abs() < 1e-300 {
                if o < lo || o > hi {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d;
            let (mut a, mut b) = ((lo - o) * inv, (hi - o) * inv);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }

    /// Distance from the box to a segment is at least this value.
    pub fn distance_lower_bound_to_segment(&self, p: Vec3, q: Vec3) -> f64 {
        let seg = Aabb {
            min: p.min(q),
            max: p.max(q),
        };
        let dx = (seg.min.x - self.max.x).max(self.min.x - seg.max.x).max(0.0);
        let dy = (seg.min.y - self.max.y).max(self.min.y - seg.max.y).max(0.0);
        let dz = (seg.min.z - self.max.z).max(self.min.z - seg.max.z).max(0.0);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn distance_to_point(&self, p: Vec3) -> f64 {
        let d = (self.min - p).max(p - self.max).max(Vec3::ZERO);
        d.length()
    }
}

/// Double-sided Möller–Trumbore test. Returns the ray parameter of the hit.
pub fn intersect_triangle(ray: &Ray, tri: &[Vec3; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = ray.direction.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-18 {
        return None;
    }
    let inv = 1.0 / det;
    let s = ray.origin - tri[0];
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = ray.direction.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t >= 0.0).then_some(t)
}

pub fn triangle_normal(tri: &[Vec3; 3]) -> Vec3 {
    (tri[1] - tri[0])
        .cross(tri[2] - tri[0])
        .try_normalize()
        .unwrap_or(Vec3::Y)
}

/// Closest point on a triangle to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: Vec3, tri: &[Vec3; 3]) -> Vec3 {
    let [a, b, c] = *tri;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}

/// Squared distance between segments `p1q1` and `p2q2`.
pub fn segment_segment_distance_sq(p1: Vec3, q1: Vec3, p2: Vec3, q2: Vec3) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(d1);
    let e = d2.dot(d2);
    let f = d2.dot(r);
    let (s, t);
    if a <= 1e-30 && e <= 1e-30 {
        return r.length_squared();
    }
    if a <= 1e-30 {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(r);
        if e <= 1e-30 {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > 1e-30 {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    let c1 = p1 + d1 * s;
    let c2 = p2 + d2 * t;
    (c1 - c2).length_squared()
}

/// Whether segment `pq` crosses the triangle.
fn segment_crosses_triangle(p: Vec3, q: Vec3, tri: &[Vec3; 3]) -> bool {
    let d = q - p;
    let len = d.length();
    if len <= 1e-15 {
        return false;
    }
    let ray = Ray {
        origin: p,
        direction: d / len,
    };
    matches!(intersect_triangle(&ray, tri), Some(t) if t <= len)
}

/// Minimum distance between segment `pq` and a triangle.
pub fn segment_triangle_distance(p: Vec3, q: Vec3, tri: &[Vec3; 3]) -> f64 {
    if segment_crosses_triangle(p, q, tri) {
        return 0.0;
    }
    let mut best = (closest_point_on_triangle(p, tri) - p)
        .length_squared()
        .min((closest_point_on_triangle(q, tri) - q).length_squared());
    for i in 0..3 {
        let (a, b) = (tri[i], tri[(i + 1) % 3]);
        best = best.min(segment_segment_distance_sq(p, q, a, b));
    }
    best.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> [Vec3; 3] {
        [
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        ]
    }

    #[test]
    fn rejects_out_of_range_indices() {
        let err = TriangleMesh::new("m", vec![Vec3::ZERO; 3], vec![[0, 1, 3]]).unwrap_err();
        assert!(matches!(err, GeometryError::IndexOutOfRange { index: 3, .. }));
    }

    #[test]
    fn rejects_degenerate_triangles() {
        let v = vec![Vec3::ZERO, Vec3::X, Vec3::X * 2.0];
        let err = TriangleMesh::new("m", v, vec![[0, 1, 2]]).unwrap_err();
        assert!(matches!(err, GeometryError::DegenerateTriangle { triangle: 0, .. }));
    }

    #[test]
    fn moller_trumbore_hits_both_sides() {
        let down = Ray::new(Vec3::new(0.2, 0.2, 1.0), Vec3::new(0.0, 0.0, -1.0)).unwrap();
        let up = Ray::new(Vec3::new(0.2, 0.2, -1.0), Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(intersect_triangle(&down, &tri()), Some(1.0));
        assert_eq!(intersect_triangle(&up, &tri()), Some(1.0));
        let miss = Ray::new(Vec3::new(0.8, 0.8, 1.0), Vec3::new(0.0, 0.0, -1.0)).unwrap();
        assert_eq!(intersect_triangle(&miss, &tri()), None);
    }

    #[test]
    fn closest_point_regions() {
        let t = tri();
        assert_eq!(closest_point_on_triangle(Vec3::new(-1.0, -1.0, 0.0), &t), t[0]);
        assert!(closest_point_on_triangle(Vec3::new(0.2, 0.2, 5.0), &t).distance(Vec3::new(0.2, 0.2, 0.0)) < 1e-12);
        let e = closest_point_on_triangle(Vec3::new(1.0, 1.0, 0.0), &t);
        assert!(e.distance(Vec3::new(0.5, 0.5, 0.0)) < 1e-12);
    }

    #[test]
    fn segment_distance_cases() {
        let t = tri();
        // Crossing the face.
        assert_eq!(segment_triangle_distance(Vec3::new(0.2, 0.2, -1.0), Vec3::new(0.2, 0.2, 1.0), &t), 0.0);
        // Parallel above the face.
        let d = segment_triangle_distance(Vec3::new(0.1, 0.1, 0.5), Vec3::new(0.3, 0.1, 0.5), &t);
        assert!((d - 0.5).abs() < 1e-12);
        // Passing beside an edge.
        let d = segment_triangle_distance(Vec3::new(2.0, -1.0, 0.0), Vec3::new(2.0, 1.0, 0.0), &t);
        assert!((d - 1.0).abs() < 1e-12);
    }
}
