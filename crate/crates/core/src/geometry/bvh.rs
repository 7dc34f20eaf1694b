//! Bounding volume hierarchy over one or more triangle meshes.

use super::math::{Ray, Vec3};
use super::mesh::{
    intersect_triangle, segment_triangle_distance, triangle_normal, Aabb, RayHit, TriangleMesh,
};
use super::GeometryError;

const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug)]
struct Node {
    aabb: Aabb,
    /// Leaf: first primitive; interior: left child.
    first: u32,
    /// Leaf: primitive count; interior: 0.
    count: u32,
    /// Interior: right child.
    right: u32,
}

#[derive(Clone, Debug)]
struct Prim {
    tri: [Vec3; 3],
    mesh: u32,
    index: u32,
    /// Position across all meshes in input order; the tie-break key.
    global: u32,
}

/// Flat BVH. Query results equal exhaustive iteration over every triangle.
#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    prims: Vec<Prim>,
    structure_ids: Vec<String>,
}

/// Builds a BVH over every triangle of `meshes`.
pub fn build_bvh(meshes: &[TriangleMesh]) -> Result<Bvh, GeometryError> {
    Bvh::build(meshes)
}

impl Bvh {
    pub fn build(meshes: &[TriangleMesh]) -> Result<Bvh, GeometryError> {
        let mut prims = Vec::new();
        for (m, mesh) in meshes.iter().enumerate() {
            for i in 0..mesh.triangles().len() {
                prims.push(Prim {
                    tri: mesh.triangle(i),
                    mesh: m as u32,
                    index: i as u32,
                    global: prims.len() as u32,
                });
            }
        }
        if prims.is_empty() {
            return Err(GeometryError::EmptyGeometry);
        }
        let mut bvh = Bvh {
            nodes: Vec::with_capacity(2 * prims.len() / LEAF_SIZE + 1),
            prims,
            structure_ids: meshes.iter().map(|m| m.structure_id().to_owned()).collect(),
        };
        let n = bvh.prims.len();
        bvh.build_node(0, n);
        Ok(bvh)
    }

    fn build_node(&mut self, start: usize, end: usize) -> u32 {
        let slice = &self.prims[start..end];
        let bounds = slice
            .iter()
            .fold(Aabb::EMPTY, |b, p| b.union(Aabb::from_triangle(&p.tri)));
        let extent = (bounds.max - bounds.min).length().max(1.0);
        let aabb = bounds.padded(extent * 1e-12);
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            aabb,
            first: start as u32,
            count: (end - start) as u32,
            right: 0,
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let centroids = slice
            .iter()
            .fold(Aabb::EMPTY, |b, p| b.grow((p.tri[0] + p.tri[1] + p.tri[2]) / 3.0));
        let size = centroids.max - centroids.min;
        let axis = if size.x >= size.y && size.x >= size.z {
            0
        } else if size.y >= size.z {
            1
        } else {
            2
        };
        let mid = (start + end) / 2;
        let key = |p: &Prim| (p.tri[0].axis(axis) + p.tri[1].axis(axis) + p.tri[2].axis(axis), p.global);
        self.prims[start..end].select_nth_unstable_by(mid - start, |a, b| {
            let (ka, kb) = (key(a), key(b));
            ka.0.total_cmp(&kb.0).then(ka.1.cmp(&kb.1))
        });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        let node = &mut self.nodes[id as usize];
        node.first = left;
        node.count = 0;
        node.right = right;
        id
    }

    pub fn triangle_count(&self) -> usize {
        self.prims.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn structure_ids(&self) -> &[String] {
        &self.structure_ids
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].aabb
    }

    /// Checks structural invariants: each triangle referenced exactly once and
    /// every node box containing its children.
    pub fn check_invariants(&self) -> Result<(), String> {
        let mut seen = vec![0u32; self.prims.len()];
        let mut stack = vec![0u32];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            if node.count > 0 {
                for p in &self.prims[node.first as usize..(node.first + node.count) as usize] {
                    seen[p.global as usize] += 1;
                    if !node.aabb.contains(&Aabb::from_triangle(&p.tri)) {
                        return Err(format!("leaf {id} does not contain triangle {}", p.global));
                    }
                }
            } else {
                for child in [node.first, node.right] {
                    if !node.aabb.contains(&self.nodes[child as usize].aabb) {
                        return Err(format!("node {id} does not contain child {child}"));
                    }
                    stack.push(child);
                }
            }
        }
        match seen.iter().position(|&c| c != 1) {
            Some(g) => Err(format!("triangle {g} referenced {} times", seen[g])),
            None => Ok(()),
        }
    }

    /// Nearest hit with `distance <= max_distance`; equal distances resolve to
    /// the triangle that comes first in input order.
    pub fn ray_cast(&self, ray: &Ray, max_distance: f64) -> Option<RayHit> {
        if !(max_distance > 0.0) {
            return None;
        }
        let mut best: Option<(f64, u32, usize)> = None;
        let mut limit = max_distance;
        let mut stack = vec![0u32];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            if node.aabb.ray_entry(ray, limit).is_none() {
                continue;
            }
            if node.count > 0 {
                let range = node.first as usize..(node.first + node.count) as usize;
                for (k, p) in self.prims[range.clone()].iter().enumerate() {
                    let Some(t) = intersect_triangle(ray, &p.tri) else {
                        continue;
                    };
                    if t > max_distance {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((bt, bg, _)) => t < bt || (t == bt && p.global < bg),
                    };
                    if better {
                        best = Some((t, p.global, range.start + k));
                        limit = t;
                    }
                }
            } else {
                let (l, r) = (node.first, node.right);
                let dl = self.nodes[l as usize].aabb.ray_entry(ray, limit);
                let dr = self.nodes[r as usize].aabb.ray_entry(ray, limit);
                // Visit the nearer child first.
                match (dl, dr) {
                    (Some(a), Some(b)) if a <= b => {
                        stack.push(r);
                        stack.push(l);
                    }
                    (Some(_), Some(_)) => {
                        stack.push(l);
                        stack.push(r);
                    }
                    (Some(_), None) => stack.push(l),
                    (None, Some(_)) => stack.push(r),
                    (None, None) => {}
                }
            }
        }
        best.map(|(t, _, slot)| self.make_hit(ray, t, slot))
    }

    fn make_hit(&self, ray: &Ray, t: f64, slot: usize) -> RayHit {
        let p = &self.prims[slot];
        let mut normal = triangle_normal(&p.tri);
        if normal.dot(ray.direction) > 0.0 {
            normal = -normal;
        }
        RayHit {
            distance: t,
            point: ray.at(t),
            normal,
            structure_id: self.structure_ids[p.mesh as usize].clone(),
            triangle_index: p.index as usize,
        }
    }

    /// Whether any triangle comes closer than `radius` to segment `pq`.
    pub fn segment_within(&self, p: Vec3, q: Vec3, radius: f64) -> bool {
        let mut stack = vec![0u32];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            if node.aabb.distance_lower_bound_to_segment(p, q) > radius {
                continue;
            }
            if node.count > 0 {
                let range = node.first as usize..(node.first + node.count) as usize;
                if self.prims[range]
                    .iter()
                    .any(|prim| segment_triangle_distance(p, q, &prim.tri) < radius)
                {
                    return true;
                }
            } else {
                stack.push(node.first);
                stack.push(node.right);
            }
        }
        false
    }

    /// Distance from `point` to the nearest surface, if within `max_distance`.
    pub fn distance_to_surface(&self, point: Vec3, max_distance: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        let mut limit = max_distance;
        let mut stack = vec![0u32];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id as usize];
            if node.aabb.distance_to_point(point) > limit {
                continue;
            }
            if node.count > 0 {
                let range = node.first as usize..(node.first + node.count) as usize;
                for prim in &self.prims[range] {
                    let d = segment_triangle_distance(point, point, &prim.tri);
                    if d <= limit {
                        limit = d;
                        best = Some(d);
                    }
                }
            } else {
                stack.push(node.first);
                stack.push(node.right);
            }
        }
        best
    }
}

/// Nearest intersection through `bvh`, or `None` on a miss.
pub fn ray_cast(bvh: &Bvh, ray: &Ray, max_distance: f64) -> Option<RayHit> {
    bvh.ray_cast(ray, max_distance)
}
