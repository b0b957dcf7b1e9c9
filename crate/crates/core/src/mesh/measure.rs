//! Volume, planar cross-section and mirror-symmetry measures of closed meshes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::trimesh::TriMesh;
use crate::mesh::vec3::{self, Aabb, Point3};
use crate::scalar::Scalar;

/// Enclosed volume by signed-tetrahedra summation. Winding direction is
/// irrelevant: the magnitude is returned.
pub fn mesh_volume<T: Scalar>(mesh: &TriMesh<T>) -> Result<f64> {
    mesh.ensure_watertight()?;
    Ok(signed_volume(mesh).abs())
}

/// Signed volume; positive for outward winding.
pub fn signed_volume<T: Scalar>(mesh: &TriMesh<T>) -> f64 {
    let six: f64 = mesh
        .triangles()
        .map(|[a, b, c]| {
            let [a, b, c] = [a, b, c].map(vec3::cast::<T, f64>);
            vec3::dot(a, vec3::cross(b, c))
        })
        .sum();
    six / 6.0
}

/// How a planar cross-section is measured.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SectionMethod {
    /// Slice every triangle and integrate the oriented contour.
    Exact,
    /// Count occupied cells of the voxel slab centred on the plane.
    Voxel { resolution: usize },
}

/// Area of the solid's intersection with the plane `x[axis] = offset`.
pub fn cross_section_area<T: Scalar>(mesh: &TriMesh<T>, axis: usize, offset: f64) -> Result<f64> {
    cross_section_area_with(mesh, axis, offset, SectionMethod::Exact)
}

pub fn cross_section_area_with<T: Scalar>(
    mesh: &TriMesh<T>,
    axis: usize,
    offset: f64,
    method: SectionMethod,
) -> Result<f64> {
    check_axis(axis)?;
    mesh.ensure_watertight()?;
    match method {
        SectionMethod::Exact => Ok(exact_section(mesh, axis, offset)),
        SectionMethod::Voxel { resolution } => voxel_section(mesh, axis, offset, resolution),
    }
}

fn check_axis(axis: usize) -> Result<()> {
    if axis > 2 {
        return Err(Error::Parameter(format!("plane axis must be 0, 1 or 2, got {axis}")));
    }
    Ok(())
}

fn exact_section<T: Scalar>(mesh: &TriMesh<T>, axis: usize, offset: f64) -> f64 {
    let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
    let mut e_axis = [0.0; 3];
    e_axis[axis] = 1.0;
    let mut twice_area = 0.0;
    for tri in mesh.triangles() {
        let p = tri.map(vec3::cast::<T, f64>);
        let above = p.map(|q| q[axis] >= offset);
        if above[0] == above[1] && above[1] == above[2] {
            continue;
        }
        let mut ends = [[0.0f64; 3]; 2];
        let mut n = 0;
        for k in 0..3 {
            let (a, b) = (p[k], p[(k + 1) % 3]);
            if above[k] != above[(k + 1) % 3] {
                let t = (offset - a[axis]) / (b[axis] - a[axis]);
                ends[n] = vec3::lerp(a, b, t);
                n += 1;
            }
        }
        let normal = vec3::cross(vec3::sub(p[1], p[0]), vec3::sub(p[2], p[0]));
        let dir = vec3::cross(e_axis, normal);
        let (mut s, mut e) = (ends[0], ends[1]);
        if vec3::dot(vec3::sub(e, s), dir) < 0.0 {
            std::mem::swap(&mut s, &mut e);
        }
        twice_area += s[u] * e[v] - e[u] * s[v];
    }
    (twice_area * 0.5).abs()
}

fn voxel_section<T: Scalar>(mesh: &TriMesh<T>, axis: usize, offset: f64, resolution: usize) -> Result<f64> {
    if resolution < 2 {
        return Err(Error::Parameter("voxel section resolution must be at least 2".into()));
    }
    let b = mesh.bounds();
    let (bmin, bmax) = (vec3::cast::<T, f64>(b.min), vec3::cast::<T, f64>(b.max));
    if offset < bmin[axis] || offset > bmax[axis] {
        return Ok(0.0);
    }
    let mut lo = bmin;
    let mut hi = bmax;
    let thickness = (bmax[axis] - bmin[axis]) / resolution as f64;
    lo[axis] = offset - thickness * 0.5;
    hi[axis] = offset + thickness * 0.5;
    let mut res = [resolution; 3];
    res[axis] = 1;
    let occ = voxelize(mesh, axis, lo, hi, res)?;
    let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
    Ok(occ.count() as f64 * occ.cell[u] * occ.cell[v])
}

/// Inside/outside flags of cell centres over a box; x-fastest layout.
#[derive(Clone, Debug, PartialEq)]
pub struct Occupancy {
    pub resolution: [usize; 3],
    pub min: [f64; 3],
    pub cell: [f64; 3],
    pub cells: Vec<bool>,
}

impl Occupancy {
    #[inline]
    pub fn index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.resolution[0] * (ijk[1] + self.resolution[1] * ijk[2])
    }

    #[inline]
    pub fn get(&self, ijk: [usize; 3]) -> bool {
        self.cells[self.index(ijk)]
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell.iter().product()
    }
}

/// Rasterizes the interior of a closed mesh by casting one ray per cell
/// column along `ray_axis` and filling between crossing pairs. Columns
/// passing exactly through edges or vertices are resolved with a fixed
/// top-left ownership rule, so shared edges are counted once.
pub fn voxelize<T: Scalar>(
    mesh: &TriMesh<T>,
    ray_axis: usize,
    min: [f64; 3],
    max: [f64; 3],
    resolution: [usize; 3],
) -> Result<Occupancy> {
    check_axis(ray_axis)?;
    if resolution.iter().any(|&r| r == 0) || (0..3).any(|a| !(max[a] > min[a])) {
        return Err(Error::Parameter("voxelization box or resolution is empty".into()));
    }
    let cell: [f64; 3] = std::array::from_fn(|a| (max[a] - min[a]) / resolution[a] as f64);
    let (u, v) = ((ray_axis + 1) % 3, (ray_axis + 2) % 3);
    let (nu, nv) = (resolution[u], resolution[v]);
    let mut crossings: Vec<Vec<f64>> = vec![Vec::new(); nu * nv];
    let center = |a: usize, i: usize| min[a] + (i as f64 + 0.5) * cell[a];

    for tri in mesh.triangles() {
        let p = tri.map(vec3::cast::<T, f64>);
        let mut q = p.map(|x| [x[u], x[v], x[ray_axis]]);
        let area2 = orient(q[0], q[1], q[2]);
        if area2 == 0.0 {
            continue;
        }
        if area2 < 0.0 {
            q.swap(1, 2);
        }
        let area2 = area2.abs();
        let lo_u = q.iter().map(|x| x[0]).fold(f64::INFINITY, f64::min);
        let hi_u = q.iter().map(|x| x[0]).fold(f64::NEG_INFINITY, f64::max);
        let lo_v = q.iter().map(|x| x[1]).fold(f64::INFINITY, f64::min);
        let hi_v = q.iter().map(|x| x[1]).fold(f64::NEG_INFINITY, f64::max);
        let iu0 = (((lo_u - min[u]) / cell[u] - 0.5).ceil().max(0.0)) as usize;
        let iu1 = (((hi_u - min[u]) / cell[u] - 0.5).floor()).min(nu as f64 - 1.0);
        let iv0 = (((lo_v - min[v]) / cell[v] - 0.5).ceil().max(0.0)) as usize;
        let iv1 = (((hi_v - min[v]) / cell[v] - 0.5).floor()).min(nv as f64 - 1.0);
        if iu1 < 0.0 || iv1 < 0.0 {
            continue;
        }
        for iv in iv0..=iv1 as usize {
            for iu in iu0..=iu1 as usize {
                let c = [center(u, iu), center(v, iv), 0.0];
                let w0 = orient(q[1], q[2], c);
                let w1 = orient(q[2], q[0], c);
                let w2 = orient(q[0], q[1], c);
                if owns(w0, q[1], q[2]) && owns(w1, q[2], q[0]) && owns(w2, q[0], q[1]) {
                    let depth = (w0 * q[0][2] + w1 * q[1][2] + w2 * q[2][2]) / area2;
                    crossings[iu + nu * iv].push(depth);
                }
            }
        }
    }

    let mut cells = vec![false; resolution.iter().product()];
    let index = |ijk: [usize; 3]| ijk[0] + resolution[0] * (ijk[1] + resolution[1] * ijk[2]);
    for iv in 0..nv {
        for iu in 0..nu {
            let col = &mut crossings[iu + nu * iv];
            if col.len() < 2 {
                continue;
            }
            col.sort_by(|a, b| a.total_cmp(b));
            for pair in col.chunks_exact(2) {
                let first = ((pair[0] - min[ray_axis]) / cell[ray_axis] - 0.5).ceil().max(0.0) as usize;
                let last = ((pair[1] - min[ray_axis]) / cell[ray_axis] - 0.5).floor();
                if last < 0.0 {
                    continue;
                }
                let last = (last as usize).min(resolution[ray_axis] - 1);
                for ia in first..=last {
                    let mut ijk = [0; 3];
                    ijk[ray_axis] = ia;
                    ijk[u] = iu;
                    ijk[v] = iv;
                    cells[index(ijk)] = true;
                }
            }
        }
    }
    Ok(Occupancy {
        resolution,
        min,
        cell,
        cells,
    })
}

#[inline]
fn orient(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Ownership of a point lying on directed edge `a → b` of a CCW triangle.
#[inline]
fn owns(w: f64, a: [f64; 3], b: [f64; 3]) -> bool {
    if w != 0.0 {
        return w > 0.0;
    }
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    dy > 0.0 || (dy == 0.0 && dx < 0.0)
}

/// Mirror-symmetry score with a flag for the empty-half convention.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymmetryScore {
    pub iou: f64,
    /// One half of the solid was empty; `iou` is then 0 by definition.
    pub empty_half: bool,
}

/// Intersection over union between the part of the solid on one side of
/// the plane `x[axis] = offset` and the mirror image of the part on the
/// other side.
pub fn mirror_iou<T: Scalar>(mesh: &TriMesh<T>, axis: usize, offset: f64, resolution: usize) -> Result<SymmetryScore> {
    check_axis(axis)?;
    if resolution < 32 {
        return Err(Error::Parameter(format!("mirror IoU needs resolution >= 32, got {resolution}")));
    }
    mesh.ensure_watertight()?;
    let b: Aabb<T> = mesh.bounds();
    let (bmin, bmax) = (vec3::cast::<T, f64>(b.min), vec3::cast::<T, f64>(b.max));
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for a in 0..3 {
        if a == axis {
            let half = (offset - bmin[a]).max(bmax[a] - offset) * 1.02 + 1e-9;
            lo[a] = offset - half;
            hi[a] = offset + half;
        } else {
            let pad = (bmax[a] - bmin[a]) * 0.02 + 1e-9;
            lo[a] = bmin[a] - pad;
            hi[a] = bmax[a] + pad;
        }
    }
    let mut res = [resolution; 3];
    // an even count puts the plane on a cell boundary
    res[axis] = resolution + resolution % 2;
    let occ = voxelize(mesh, axis, lo, hi, res)?;
    let n = res[axis];
    let half = n / 2;
    let (mut inter, mut uni, mut lower, mut upper) = (0usize, 0usize, 0usize, 0usize);
    for k in 0..res[2] {
        for j in 0..res[1] {
            for i in 0..res[0] {
                let ijk = [i, j, k];
                if ijk[axis] >= half {
                    continue;
                }
                let mut mirrored = ijk;
                mirrored[axis] = n - 1 - ijk[axis];
                let a = occ.get(ijk);
                let b = occ.get(mirrored);
                lower += a as usize;
                upper += b as usize;
                inter += (a && b) as usize;
                uni += (a || b) as usize;
            }
        }
    }
    if lower == 0 || upper == 0 {
        return Ok(SymmetryScore {
            iou: 0.0,
            empty_half: true,
        });
    }
    Ok(SymmetryScore {
        iou: inter as f64 / uni as f64,
        empty_half: false,
    })
}

/// Reflects a mesh across `x[axis] = offset`, restoring outward winding.
pub fn reflect<T: Scalar>(mesh: &TriMesh<T>, axis: usize, offset: f64) -> TriMesh<T> {
    let off = T::c(offset);
    mesh.map_vertices(|mut p: Point3<T>| {
        p[axis] = off + off - p[axis];
        p
    })
    .flipped()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::trimesh::{box_mesh, icosphere};

    #[test]
    fn unit_cube_volume_and_section() {
        let cube = box_mesh([0.0f64; 3], [1.0; 3]);
        assert_eq!(mesh_volume(&cube).unwrap(), 1.0);
        assert_eq!(mesh_volume(&cube.flipped()).unwrap(), 1.0);
        assert!((cross_section_area(&cube, 0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cross_section_area(&cube, 1, 1.5).unwrap(), 0.0);
        let voxel = cross_section_area_with(&cube, 2, 0.5, SectionMethod::Voxel { resolution: 64 }).unwrap();
        assert!((voxel - 1.0).abs() < 0.05, "{voxel}");
    }

    #[test]
    fn voxelized_volume_tracks_exact_volume() {
        let s = icosphere([0.5f64; 3], 0.3, 3);
        let exact = mesh_volume(&s).unwrap();
        let occ = voxelize(&s, 0, [0.1; 3], [0.9; 3], [80; 3]).unwrap();
        let approx = occ.count() as f64 * occ.cell_volume();
        assert!((approx - exact).abs() / exact < 0.02, "{approx} vs {exact}");
    }

    #[test]
    fn open_mesh_is_rejected() {
        let mut cube = box_mesh([0.0f64; 3], [1.0; 3]);
        cube.faces.pop();
        assert!(matches!(mesh_volume(&cube), Err(Error::NotWatertight(_))));
        assert!(cross_section_area(&cube, 0, 0.5).is_err());
    }

    #[test]
    fn centred_cube_is_mirror_symmetric() {
        let cube = box_mesh([0.3f64, 0.2, 0.1], [0.7, 0.6, 0.9]);
        let s = mirror_iou(&cube, 0, 0.5, 64).unwrap();
        assert!(s.iou >= 0.98 && !s.empty_half, "{s:?}");
    }

    #[test]
    fn lobe_on_one_side_scores_zero() {
        let lobe = icosphere([0.25f64, 0.5, 0.5], 0.1, 2);
        let s = mirror_iou(&lobe, 0, 0.5, 32).unwrap();
        assert_eq!(s.iou, 0.0);
        assert!(s.empty_half);
    }
}
