use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::mc_table::TRIANGLE_TABLE;
use crate::mesh::trimesh::TriMesh;
use crate::mesh::vec3::Point3;
use crate::scalar::Scalar;

/// Regular lattice of scalar samples; `values` is x-fastest
/// (`i + nx * (j + ny * k)`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarGrid<T> {
    pub resolution: [usize; 3],
    pub origin: [T; 3],
    pub spacing: T,
    pub values: Vec<T>,
}

impl<T: Scalar> ScalarGrid<T> {
    pub fn new(resolution: [usize; 3], origin: Point3<T>, spacing: T, values: Vec<T>) -> Result<Self> {
        if resolution.iter().any(|&n| n == 0) {
            return Err(Error::Parameter(format!("grid resolution {resolution:?} has an empty axis")));
        }
        if !(spacing > T::zero()) {
            return Err(Error::Parameter(format!("grid spacing must be positive, got {spacing}")));
        }
        let expected: usize = resolution.iter().product();
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "grid {resolution:?} needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(Self {
            resolution,
            origin,
            spacing,
            values,
        })
    }

    /// Samples `f` at every node.
    pub fn from_fn(resolution: [usize; 3], origin: Point3<T>, spacing: T, f: impl Fn(Point3<T>) -> T) -> Result<Self> {
        let mut values = Vec::with_capacity(resolution.iter().product());
        for k in 0..resolution[2] {
            for j in 0..resolution[1] {
                for i in 0..resolution[0] {
                    values.push(f(node_position(origin, spacing, [i, j, k])));
                }
            }
        }
        Self::new(resolution, origin, spacing, values)
    }

    /// `n³` cell centers of the unit cube.
    pub fn unit_cube_cell_centers(n: usize, f: impl Fn(Point3<T>) -> T) -> Result<Self> {
        let h = T::one() / T::c(n as f64);
        Self::from_fn([n; 3], [h * T::c(0.5); 3], h, f)
    }

    /// Node positions of the `n³` unit-cube cell-center lattice, in value order.
    pub fn unit_cube_cell_center_positions(n: usize) -> Vec<Point3<T>> {
        let h = T::one() / T::c(n as f64);
        let origin = [h * T::c(0.5); 3];
        let mut out = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    out.push(node_position(origin, h, [i, j, k]));
                }
            }
        }
        out
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution[0] * (j + self.resolution[1] * k)
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize, k: usize) -> T {
        self.values[self.index(i, j, k)]
    }

    pub fn position(&self, i: usize, j: usize, k: usize) -> Point3<T> {
        node_position(self.origin, self.spacing, [i, j, k])
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[inline]
fn node_position<T: Scalar>(origin: Point3<T>, spacing: T, ijk: [usize; 3]) -> Point3<T> {
    std::array::from_fn(|a| origin[a] + spacing * T::c(ijk[a] as f64))
}

const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

const EDGES: [(usize, usize); 12] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 0),
    (4, 5),
    (5, 6),
    (6, 7),
    (7, 4),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// Extracts the `level` isosurface with the classic 256-case table and
/// linear interpolation along cell edges. Values below `level` are inside.
///
/// The lattice is treated as surrounded by exterior samples, so surfaces
/// reaching the border are capped half a spacing beyond the outer nodes
/// (the unit-cube faces for a cell-centre lattice) and the result is always
/// closed. Vertices
/// are shared between neighbouring cells; faces are wound with normals
/// pointing towards increasing values. An empty level set yields an empty
/// mesh.
pub fn marching_cubes<T: Scalar>(grid: &ScalarGrid<T>, level: T) -> Result<TriMesh<T>> {
    if !grid.all_finite() {
        return Err(Error::Parameter("grid contains non-finite values".into()));
    }
    let [nx, ny, nz] = grid.resolution;
    // padded lattice: index p maps to real index p - 1
    let (px, py, pz) = (nx + 2, ny + 2, nz + 2);
    let ghost = level + grid.spacing;
    let is_ghost = |p: [usize; 3]| -> bool {
        !((1..=nx).contains(&p[0]) && (1..=ny).contains(&p[1]) && (1..=nz).contains(&p[2]))
    };
    let sample = |p: [usize; 3]| -> T {
        if is_ghost(p) {
            ghost
        } else {
            grid.value(p[0] - 1, p[1] - 1, p[2] - 1)
        }
    };
    let position = |p: [usize; 3]| -> Point3<T> {
        std::array::from_fn(|a| grid.origin[a] + grid.spacing * (T::c(p[a] as f64) - T::one()))
    };

    let mut edge_vertex = vec![u32::MAX; px * py * pz * 3];
    let mut vertices: Vec<Point3<T>> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();

    for k in 0..pz - 1 {
        for j in 0..py - 1 {
            for i in 0..px - 1 {
                let base = [i, j, k];
                let corner = |c: usize| [base[0] + CORNERS[c][0], base[1] + CORNERS[c][1], base[2] + CORNERS[c][2]];
                let vals: [T; 8] = std::array::from_fn(|c| sample(corner(c)));
                let case = vals
                    .iter()
                    .enumerate()
                    .fold(0usize, |acc, (c, &v)| if v < level { acc | (1 << c) } else { acc });
                if case == 0 || case == 255 {
                    continue;
                }
                let mut edge_ids = [u32::MAX; 12];
                let row = &TRIANGLE_TABLE[case];
                for &e in row.iter().take_while(|&&e| e >= 0) {
                    let e = e as usize;
                    if edge_ids[e] != u32::MAX {
                        continue;
                    }
                    let (ca, cb) = EDGES[e];
                    let (pa, pb) = (corner(ca), corner(cb));
                    // canonical direction: from the lower lattice node
                    let (lo, hi) = if pa <= pb { (pa, pb) } else { (pb, pa) };
                    let axis = (0..3).find(|&a| lo[a] != hi[a]).expect("edge spans one axis");
                    let key = (lo[0] + px * (lo[1] + py * lo[2])) * 3 + axis;
                    if edge_vertex[key] == u32::MAX {
                        let t = if is_ghost(lo) || is_ghost(hi) {
                            T::c(0.5)
                        } else {
                            let (va, vb) = (sample(lo), sample(hi));
                            ((level - va) / (vb - va)).max(T::zero()).min(T::one())
                        };
                        let (a, b) = (position(lo), position(hi));
                        vertices.push(std::array::from_fn(|d| a[d] + (b[d] - a[d]) * t));
                        edge_vertex[key] = vertices.len() as u32 - 1;
                    }
                    edge_ids[e] = edge_vertex[key];
                }
                for tri in row.chunks_exact(3).take_while(|t| t[0] >= 0) {
                    let [a, b, c] = [tri[0], tri[1], tri[2]].map(|e| edge_ids[e as usize]);
                    faces.push([a, c, b]);
                }
            }
        }
    }
    if faces.is_empty() {
        log::debug!("marching cubes: level {level} not crossed, empty mesh");
    }
    Ok(TriMesh { vertices, faces })
}
