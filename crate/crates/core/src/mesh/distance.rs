//! Exact point-to-surface distance with a BVH, and inside/outside
//! classification by generalized winding number.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mesh::trimesh::TriMesh;
use crate::mesh::vec3::{self, Aabb, Point3};
use crate::scalar::Scalar;

const LEAF_SIZE: usize = 4;

/// Which feature of a triangle the closest point lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Feature {
    Face,
    /// Edge `k` runs from corner `k` to corner `(k + 1) % 3`.
    Edge(u8),
    Vertex(u8),
}

#[derive(Clone, Copy, Debug)]
pub struct ClosestPoint<T> {
    pub point: Point3<T>,
    pub distance2: T,
    pub face: usize,
    pub feature: Feature,
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision
/// Detection, 5.1.5), with the Voronoi feature it falls in.
pub fn closest_point_on_triangle<T: Scalar>(p: Point3<T>, tri: [Point3<T>; 3]) -> (Point3<T>, Feature) {
    use vec3::{add, dot, scale, sub};
    let [a, b, c] = tri;
    let zero = T::zero();
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= zero && d2 <= zero {
        return (a, Feature::Vertex(0));
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= zero && d4 <= d3 {
        return (b, Feature::Vertex(1));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= zero && d1 >= zero && d3 <= zero {
        let v = d1 / (d1 - d3);
        return (add(a, scale(ab, v)), Feature::Edge(0));
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= zero && d5 <= d6 {
        return (c, Feature::Vertex(2));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= zero && d2 >= zero && d6 <= zero {
        let w = d2 / (d2 - d6);
        return (add(a, scale(ac, w)), Feature::Edge(2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= zero && (d4 - d3) >= zero && (d5 - d6) >= zero {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (add(b, scale(sub(c, b), w)), Feature::Edge(1));
    }
    let denom = T::one() / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (add(a, add(scale(ab, v), scale(ac, w))), Feature::Face)
}

/// Solid angle subtended by triangle `abc` seen from `p`
/// (Van Oosterom & Strackee).
pub fn solid_angle<T: Scalar>(p: Point3<T>, tri: [Point3<T>; 3]) -> T {
    use vec3::{cross, dot, norm, sub};
    let a = sub(tri[0], p);
    let b = sub(tri[1], p);
    let c = sub(tri[2], p);
    let (la, lb, lc) = (norm(a), norm(b), norm(c));
    let det = dot(a, cross(b, c));
    let denom = la * lb * lc + dot(a, b) * lc + dot(b, c) * la + dot(c, a) * lb;
    T::c(2.0) * det.atan2(denom)
}

#[derive(Clone, Debug)]
struct BvhNode<T> {
    bounds: Aabb<T>,
    /// Leaf when `count > 0`: faces `order[start..start + count]`.
    start: u32,
    count: u32,
    left: u32,
    right: u32,
}

/// Immutable acceleration structure answering distance and sign queries.
/// Safe to share between threads once built.
#[derive(Clone, Debug)]
pub struct DistanceIndex<T> {
    mesh: TriMesh<T>,
    nodes: Vec<BvhNode<T>>,
    order: Vec<u32>,
    bounds: Aabb<T>,
    watertight: bool,
    face_normals: Vec<Point3<T>>,
    edge_normals: HashMap<(u32, u32), Point3<T>>,
    vertex_normals: Vec<Point3<T>>,
}

impl<T: Scalar> DistanceIndex<T> {
    pub fn new(mesh: &TriMesh<T>) -> Result<Self> {
        mesh.validate_indices()?;
        if mesh.faces.is_empty() {
            return Err(Error::Degenerate("mesh has no faces".into()));
        }
        let boxes: Vec<Aabb<T>> = mesh.triangles().map(|t| Aabb::from_points(&t)).collect();
        let centroids: Vec<Point3<T>> = boxes.iter().map(Aabb::center).collect();
        let mut order: Vec<u32> = (0..mesh.faces.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * mesh.faces.len() / LEAF_SIZE + 1);
        build(&mut nodes, &mut order, 0, mesh.faces.len(), &boxes, &centroids);

        let watertight = mesh.is_watertight();
        let (face_normals, edge_normals, vertex_normals) = pseudonormals(mesh);
        Ok(Self {
            bounds: mesh.bounds(),
            mesh: mesh.clone(),
            nodes,
            order,
            watertight,
            face_normals,
            edge_normals,
            vertex_normals,
        })
    }

    pub fn mesh(&self) -> &TriMesh<T> {
        &self.mesh
    }

    pub fn is_watertight(&self) -> bool {
        self.watertight
    }

    pub fn closest_point(&self, p: Point3<T>) -> ClosestPoint<T> {
        let mut best = ClosestPoint {
            point: p,
            distance2: T::infinity(),
            face: 0,
            feature: Feature::Face,
        };
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.bounds.distance2(p) >= best.distance2 {
                continue;
            }
            if node.count > 0 {
                let range = node.start as usize..(node.start + node.count) as usize;
                for &f in &self.order[range] {
                    let (q, feature) = closest_point_on_triangle(p, self.mesh.triangle(f as usize));
                    let d2 = vec3::norm2(vec3::sub(p, q));
                    if d2 < best.distance2 {
                        best = ClosestPoint {
                            point: q,
                            distance2: d2,
                            face: f as usize,
                            feature,
                        };
                    }
                }
            } else {
                let (l, r) = (node.left, node.right);
                let dl = self.nodes[l as usize].bounds.distance2(p);
                let dr = self.nodes[r as usize].bounds.distance2(p);
                // nearer child popped first
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best
    }

    pub fn unsigned_distance(&self, p: Point3<T>) -> T {
        self.closest_point(p).distance2.sqrt()
    }

    /// Generalized winding number: ≈1 inside, ≈0 outside a closed,
    /// outward-wound surface.
    pub fn winding_number(&self, p: Point3<T>) -> T {
        if !self.bounds.contains(p) {
            return T::zero();
        }
        let total = self
            .mesh
            .triangles()
            .fold(T::zero(), |acc, t| acc + solid_angle(p, t));
        total / T::c(4.0 * PI)
    }

    /// Signed distance, negative inside. Requires a watertight mesh.
    pub fn signed_distance(&self, p: Point3<T>) -> Result<T> {
        if !self.watertight {
            return Err(Error::NotWatertight(
                "signed distance requested on an open mesh; use unsigned_distance".into(),
            ));
        }
        let cp = self.closest_point(p);
        let d = cp.distance2.sqrt();
        if d == T::zero() {
            return Ok(T::zero());
        }
        let w = self.winding_number(p);
        let inside = if (w - T::c(0.5)).abs() > T::c(0.25) {
            w > T::c(0.5)
        } else {
            // ambiguous winding number (p on or extremely near the surface)
            vec3::dot(vec3::sub(p, cp.point), self.pseudonormal(&cp)) < T::zero()
        };
        Ok(if inside { -d } else { d })
    }

    /// `signed` selects between the signed query and the plain distance.
    pub fn distance(&self, p: Point3<T>, signed: bool) -> Result<T> {
        if signed {
            self.signed_distance(p)
        } else {
            Ok(self.unsigned_distance(p))
        }
    }

    /// Angle-weighted pseudonormal of the closest feature.
    pub fn pseudonormal(&self, cp: &ClosestPoint<T>) -> Point3<T> {
        let f = self.mesh.faces[cp.face];
        match cp.feature {
            Feature::Face => self.face_normals[cp.face],
            Feature::Edge(k) => {
                let (a, b) = (f[k as usize], f[(k as usize + 1) % 3]);
                self.edge_normals
                    .get(&(a.min(b), a.max(b)))
                    .copied()
                    .unwrap_or(self.face_normals[cp.face])
            }
            Feature::Vertex(k) => self.vertex_normals[f[k as usize] as usize],
        }
    }
}

fn build<T: Scalar>(
    nodes: &mut Vec<BvhNode<T>>,
    order: &mut [u32],
    start: usize,
    end: usize,
    boxes: &[Aabb<T>],
    centroids: &[Point3<T>],
) -> u32 {
    let slice = &mut order[start..end];
    let bounds = slice
        .iter()
        .fold(Aabb::empty(), |acc, &f| acc.union(&boxes[f as usize]));
    let index = nodes.len() as u32;
    nodes.push(BvhNode {
        bounds,
        start: start as u32,
        count: (end - start) as u32,
        left: 0,
        right: 0,
    });
    if end - start <= LEAF_SIZE {
        return index;
    }
    let cb = Aabb::from_points(slice.iter().map(|&f| &centroids[f as usize]));
    let ext = cb.extent();
    let axis = if ext[0] >= ext[1] && ext[0] >= ext[2] {
        0
    } else if ext[1] >= ext[2] {
        1
    } else {
        2
    };
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis]
            .partial_cmp(&centroids[b as usize][axis])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let left = build(nodes, order, start, start + mid, boxes, centroids);
    let right = build(nodes, order, start + mid, end, boxes, centroids);
    let node = &mut nodes[index as usize];
    node.count = 0;
    node.left = left;
    node.right = right;
    index
}

#[allow(clippy::type_complexity)]
fn pseudonormals<T: Scalar>(
    mesh: &TriMesh<T>,
) -> (Vec<Point3<T>>, HashMap<(u32, u32), Point3<T>>, Vec<Point3<T>>) {
    let face_normals: Vec<Point3<T>> = (0..mesh.faces.len())
        .map(|f| vec3::normalized(mesh.face_normal(f)))
        .collect();
    let mut edge_normals: HashMap<(u32, u32), Point3<T>> = HashMap::new();
    let mut vertex_normals = vec![[T::zero(); 3]; mesh.vertices.len()];
    for (fi, f) in mesh.faces.iter().enumerate() {
        let n = face_normals[fi];
        let tri = mesh.triangle(fi);
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            let e = edge_normals.entry((a.min(b), a.max(b))).or_insert([T::zero(); 3]);
            *e = vec3::add(*e, n);
            let u = vec3::normalized(vec3::sub(tri[(k + 1) % 3], tri[k]));
            let v = vec3::normalized(vec3::sub(tri[(k + 2) % 3], tri[k]));
            let angle = vec3::dot(u, v).max(-T::one()).min(T::one()).acos();
            vertex_normals[f[k] as usize] = vec3::add(vertex_normals[f[k] as usize], vec3::scale(n, angle));
        }
    }
    (face_normals, edge_normals, vertex_normals)
}

/// Convenience wrapper building a throwaway index.
pub fn signed_distance<T: Scalar>(mesh: &TriMesh<T>, p: Point3<T>) -> Result<T> {
    DistanceIndex::new(mesh)?.signed_distance(p)
}
