use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mesh::vec3::{self, Aabb, Point3};
use crate::scalar::Scalar;

/// Indexed triangle surface.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriMesh<T> {
    pub vertices: Vec<Point3<T>>,
    pub faces: Vec<[u32; 3]>,
}

/// Result of the edge-manifold check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    /// Every edge has exactly two incident faces traversing it in opposite
    /// directions.
    Watertight,
    /// Some edge has a single incident face.
    Open { boundary_edges: usize },
    /// Some edge has more than two incident faces or two faces traversing it
    /// in the same direction.
    Inconsistent { bad_edges: usize },
}

impl<T: Scalar> TriMesh<T> {
    pub fn new(vertices: Vec<Point3<T>>, faces: Vec<[u32; 3]>) -> Result<Self> {
        let mesh = Self { vertices, faces };
        mesh.validate_indices()?;
        Ok(mesh)
    }

    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            faces: Vec::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn validate_indices(&self) -> Result<()> {
        let n = self.vertices.len();
        if let Some((fi, f)) = self
            .faces
            .iter()
            .enumerate()
            .find(|(_, f)| f.iter().any(|&i| i as usize >= n))
        {
            return Err(Error::Parameter(format!(
                "face {fi} {f:?} references a vertex beyond {n}"
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn triangle(&self, face: usize) -> [Point3<T>; 3] {
        let [a, b, c] = self.faces[face];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangles(&self) -> impl Iterator<Item = [Point3<T>; 3]> + '_ {
        (0..self.faces.len()).map(move |f| self.triangle(f))
    }

    /// Unnormalized face normal (length = twice the area).
    #[inline]
    pub fn face_normal(&self, face: usize) -> Point3<T> {
        let [a, b, c] = self.triangle(face);
        vec3::cross(vec3::sub(b, a), vec3::sub(c, a))
    }

    pub fn face_area(&self, face: usize) -> T {
        vec3::norm(self.face_normal(face)) * T::c(0.5)
    }

    pub fn surface_area(&self) -> T {
        (0..self.faces.len()).fold(T::zero(), |acc, f| acc + self.face_area(f))
    }

    pub fn bounds(&self) -> Aabb<T> {
        Aabb::from_points(&self.vertices)
    }

    pub fn topology(&self) -> Topology {
        let mut directed: HashMap<(u32, u32), u32> = HashMap::with_capacity(self.faces.len() * 3);
        for f in &self.faces {
            for k in 0..3 {
                *directed.entry((f[k], f[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        let mut boundary = 0;
        let mut bad = 0;
        for (&(a, b), &count) in &directed {
            let reverse = directed.get(&(b, a)).copied().unwrap_or(0);
            if count > 1 || reverse > 1 {
                bad += 1;
            } else if reverse == 0 {
                boundary += 1;
            }
        }
        if bad > 0 {
            Topology::Inconsistent { bad_edges: bad }
        } else if boundary > 0 {
            Topology::Open {
                boundary_edges: boundary,
            }
        } else {
            Topology::Watertight
        }
    }

    pub fn is_watertight(&self) -> bool {
        !self.faces.is_empty() && self.topology() == Topology::Watertight
    }

    pub fn ensure_watertight(&self) -> Result<()> {
        if self.faces.is_empty() {
            return Err(Error::NotWatertight("mesh has no faces".into()));
        }
        match self.topology() {
            Topology::Watertight => Ok(()),
            Topology::Open { boundary_edges } => Err(Error::NotWatertight(format!(
                "{boundary_edges} boundary edges"
            ))),
            Topology::Inconsistent { bad_edges } => Err(Error::NotWatertight(format!(
                "{bad_edges} non-manifold or inconsistently wound edges"
            ))),
        }
    }

    /// Number of face-connected components (faces sharing a vertex are
    /// connected).
    pub fn connected_components(&self) -> usize {
        let mut parent: Vec<u32> = (0..self.vertices.len() as u32).collect();
        fn find(parent: &mut [u32], mut x: u32) -> u32 {
            while parent[x as usize] != x {
                parent[x as usize] = parent[parent[x as usize] as usize];
                x = parent[x as usize];
            }
            x
        }
        for f in &self.faces {
            let r0 = find(&mut parent, f[0]);
            for &v in &f[1..] {
                let r = find(&mut parent, v);
                if r != r0 {
                    parent[r as usize] = r0;
                }
            }
        }
        let mut used = vec![false; self.vertices.len()];
        for f in &self.faces {
            for &v in f {
                used[v as usize] = true;
            }
        }
        let mut roots: Vec<u32> = (0..self.vertices.len() as u32)
            .filter(|&v| used[v as usize])
            .map(|v| find(&mut parent, v))
            .collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }

    /// Reverses the winding of every face.
    pub fn flipped(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            faces: self.faces.iter().map(|&[a, b, c]| [a, c, b]).collect(),
        }
    }

    pub fn map_vertices(&self, f: impl Fn(Point3<T>) -> Point3<T>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Concatenates two meshes without welding.
    pub fn merged(&self, other: &Self) -> Self {
        let offset = self.vertices.len() as u32;
        let mut out = self.clone();
        out.vertices.extend_from_slice(&other.vertices);
        out.faces
            .extend(other.faces.iter().map(|f| [f[0] + offset, f[1] + offset, f[2] + offset]));
        out
    }

    pub fn cast<U: Scalar>(&self) -> TriMesh<U> {
        TriMesh {
            vertices: self.vertices.iter().map(|&v| vec3::cast(v)).collect(),
            faces: self.faces.clone(),
        }
    }
}

/// Axis-aligned box `[min, max]` with outward winding (12 triangles).
pub fn box_mesh<T: Scalar>(min: Point3<T>, max: Point3<T>) -> TriMesh<T> {
    let v = |x: usize, y: usize, z: usize| -> Point3<T> {
        [
            if x == 0 { min[0] } else { max[0] },
            if y == 0 { min[1] } else { max[1] },
            if z == 0 { min[2] } else { max[2] },
        ]
    };
    let vertices = vec![
        v(0, 0, 0),
        v(1, 0, 0),
        v(1, 1, 0),
        v(0, 1, 0),
        v(0, 0, 1),
        v(1, 0, 1),
        v(1, 1, 1),
        v(0, 1, 1),
    ];
    let faces = vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [2, 3, 7],
        [2, 7, 6],
        [1, 2, 6],
        [1, 6, 5],
        [0, 4, 7],
        [0, 7, 3],
    ];
    TriMesh { vertices, faces }
}

/// Icosphere built by repeated midpoint subdivision of an icosahedron.
pub fn icosphere<T: Scalar>(center: Point3<T>, radius: T, subdivisions: usize) -> TriMesh<T> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<[f64; 3]> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let unit = |p: [f64; 3]| {
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        [p[0] / n, p[1] / n, p[2] / n]
    };
    for v in &mut verts {
        *v = unit(*v);
    }
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, verts: &mut Vec<[f64; 3]>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                let (pa, pb) = (verts[a as usize], verts[b as usize]);
                verts.push(unit([
                    (pa[0] + pb[0]) / 2.0,
                    (pa[1] + pb[1]) / 2.0,
                    (pa[2] + pb[2]) / 2.0,
                ]));
                verts.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = verts
        .into_iter()
        .map(|p| {
            [
                center[0] + radius * T::c(p[0]),
                center[1] + radius * T::c(p[1]),
                center[2] + radius * T::c(p[2]),
            ]
        })
        .collect();
    TriMesh { vertices, faces }
}
