//! Parametric two-lobe solids: two ellipsoids joined by an optional
//! cylindrical bridge, used as a controllable synthetic population.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::features::{measure_features, FeatureVector, MeasureConfig};
use crate::error::{Error, Result};
use crate::mesh::{marching_cubes, ScalarGrid, TriMesh};

const CENTER: [f64; 3] = [0.5, 0.5, 0.5];
const MARGIN: f64 = 0.05;

/// Shape parameters in unit-cube units. Lobe offsets are relative to the
/// cube centre; the whole solid is then rotated by `tilt` about the y axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LobeParams {
    pub left_radii: [f64; 3],
    pub right_radii: [f64; 3],
    pub left_offset: [f64; 3],
    pub right_offset: [f64; 3],
    /// 0 gives a split shape.
    pub bridge_radius: f64,
    pub tilt: f64,
}

impl LobeParams {
    pub fn left_center(&self) -> [f64; 3] {
        self.rotate(add(CENTER, self.left_offset))
    }

    pub fn right_center(&self) -> [f64; 3] {
        self.rotate(add(CENTER, self.right_offset))
    }

    fn rotate(&self, p: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.tilt.sin_cos();
        let d = sub(p, CENTER);
        add(CENTER, [c * d[0] + s * d[2], d[1], -s * d[0] + c * d[2]])
    }

    fn unrotate(&self, p: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.tilt.sin_cos();
        let d = sub(p, CENTER);
        add(CENTER, [c * d[0] - s * d[2], d[1], s * d[0] + c * d[2]])
    }

    /// Half-extents of a lobe's bounding box after the tilt.
    fn lobe_half_extent(&self, radii: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.tilt.sin_cos();
        [
            ((c * radii[0]).powi(2) + (s * radii[2]).powi(2)).sqrt(),
            radii[1],
            ((s * radii[0]).powi(2) + (c * radii[2]).powi(2)).sqrt(),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self
            .left_radii
            .iter()
            .chain(&self.right_radii)
            .chain(&self.left_offset)
            .chain(&self.right_offset)
            .chain([&self.bridge_radius, &self.tilt])
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Parameter("lobe parameters must be finite".into()));
        }
        if self.left_radii.iter().chain(&self.right_radii).any(|&r| r <= 0.0) {
            return Err(Error::Parameter("lobe semi-axes must be positive".into()));
        }
        if self.bridge_radius < 0.0 {
            return Err(Error::Parameter("bridge radius must be non-negative".into()));
        }
        for (center, radii, side) in [
            (self.left_center(), self.left_radii, "left"),
            (self.right_center(), self.right_radii, "right"),
        ] {
            let half = self.lobe_half_extent(radii);
            for a in 0..3 {
                if center[a] - half[a] < MARGIN || center[a] + half[a] > 1.0 - MARGIN {
                    return Err(Error::Parameter(format!(
                        "{side} lobe leaves [{MARGIN}, {}] along axis {a}",
                        1.0 - MARGIN
                    )));
                }
            }
        }
        let (lc, rc) = (self.left_center(), self.right_center());
        let (lh, rh) = (self.lobe_half_extent(self.left_radii), self.lobe_half_extent(self.right_radii));
        if lc[0] + lh[0] >= 0.5 || rc[0] - rh[0] <= 0.5 {
            return Err(Error::Parameter("lobes must stay on their own side of the mid-plane".into()));
        }
        Ok(())
    }

    /// Signed distance bound of the union (exact for the bridge, the
    /// usual first-order estimate for the ellipsoids); the zero set is exact.
    pub fn sdf(&self, p: [f64; 3]) -> f64 {
        let q = self.unrotate(p);
        let left = ellipsoid(sub(q, add(CENTER, self.left_offset)), self.left_radii);
        let right = ellipsoid(sub(q, add(CENTER, self.right_offset)), self.right_radii);
        let mut d = left.min(right);
        if self.bridge_radius > 0.0 {
            let a = add(CENTER, self.left_offset);
            let b = add(CENTER, self.right_offset);
            d = d.min(capped_cylinder(q, a, b, self.bridge_radius));
        }
        d
    }
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn ellipsoid(p: [f64; 3], r: [f64; 3]) -> f64 {
    let k0 = (0..3).map(|a| (p[a] / r[a]).powi(2)).sum::<f64>().sqrt();
    let k1 = (0..3).map(|a| (p[a] / (r[a] * r[a])).powi(2)).sum::<f64>().sqrt();
    if k1 == 0.0 {
        return -r.iter().copied().fold(f64::INFINITY, f64::min);
    }
    k0 * (k0 - 1.0) / k1
}

fn capped_cylinder(p: [f64; 3], a: [f64; 3], b: [f64; 3], r: f64) -> f64 {
    let ba = sub(b, a);
    let pa = sub(p, a);
    let baba = dot(ba, ba);
    let paba = dot(pa, ba);
    let radial = sub(pa.map(|v| v * baba), ba.map(|v| v * paba));
    let x = dot(radial, radial).sqrt() - r * baba;
    let y = (paba - baba * 0.5).abs() - baba * 0.5;
    let (x2, y2) = (x * x, y * y * baba);
    let d = if x.max(y) < 0.0 {
        -x2.min(y2)
    } else {
        (if x > 0.0 { x2 } else { 0.0 }) + (if y > 0.0 { y2 } else { 0.0 })
    };
    d.signum() * d.abs().sqrt() / baba
}

/// A generated solid and its measured features.
#[derive(Clone, Debug)]
pub struct LobeShape {
    pub mesh: TriMesh<f64>,
    pub features: FeatureVector,
}

/// Meshes the union with marching cubes on an `n³` cell-centre grid of the
/// unit cube and measures its features.
pub fn generate_lobe_shape(params: &LobeParams, mesh_resolution: usize, measure: &MeasureConfig) -> Result<LobeShape> {
    params.validate()?;
    let mesh = mesh_lobes(params, mesh_resolution)?;
    let features = measure_features(&mesh, measure)?;
    Ok(LobeShape { mesh, features })
}

pub fn mesh_lobes(params: &LobeParams, mesh_resolution: usize) -> Result<TriMesh<f64>> {
    if mesh_resolution < 8 {
        return Err(Error::Config(format!("mesh resolution {mesh_resolution} is below 8")));
    }
    let grid = ScalarGrid::unit_cube_cell_centers(mesh_resolution, |p| params.sdf(p))?;
    marching_cubes(&grid, 0.0)
}

/// Sampling ranges of the synthetic population.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRanges {
    /// Lateral distance of each lobe centre from the mid-plane.
    pub lateral_offset: [f64; 2],
    /// Independent per-lobe shift along y and z.
    pub vertical_shift: [f64; 2],
    pub radius_x: [f64; 2],
    pub radius_y: [f64; 2],
    pub radius_z: [f64; 2],
    pub bridge_radius: [f64; 2],
    pub tilt: [f64; 2],
    /// Probability of a split (bridgeless) shape.
    pub split_fraction: f64,
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            lateral_offset: [0.17, 0.23],
            vertical_shift: [-0.04, 0.04],
            radius_x: [0.06, 0.11],
            radius_y: [0.06, 0.10],
            radius_z: [0.13, 0.21],
            bridge_radius: [0.03, 0.065],
            tilt: [-0.25, 0.25],
            split_fraction: 0.25,
        }
    }
}

impl ParamRanges {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            self.lateral_offset,
            self.vertical_shift,
            self.radius_x,
            self.radius_y,
            self.radius_z,
            self.bridge_radius,
            self.tilt,
        ];
        if ranges.iter().any(|r| !(r[0] <= r[1]) || !r[0].is_finite() || !r[1].is_finite()) {
            return Err(Error::Parameter("every range needs finite lo <= hi".into()));
        }
        if !(0.0..=1.0).contains(&self.split_fraction) {
            return Err(Error::Parameter("split fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn draw(rng: &mut impl Rng, r: [f64; 2]) -> f64 {
        if r[0] == r[1] {
            r[0]
        } else {
            rng.random_range(r[0]..r[1])
        }
    }

    /// Draws until the parameters validate (bounded number of attempts).
    pub fn sample(&self, rng: &mut impl Rng) -> Result<LobeParams> {
        self.validate()?;
        for _ in 0..1000 {
            let split = rng.random::<f64>() < self.split_fraction;
            let mut lobe = |sign: f64| {
                let radii = [
                    Self::draw(rng, self.radius_x),
                    Self::draw(rng, self.radius_y),
                    Self::draw(rng, self.radius_z),
                ];
                let offset = [
                    sign * Self::draw(rng, self.lateral_offset),
                    Self::draw(rng, self.vertical_shift),
                    Self::draw(rng, self.vertical_shift),
                ];
                (radii, offset)
            };
            let (left_radii, left_offset) = lobe(-1.0);
            let (right_radii, right_offset) = lobe(1.0);
            let bridge = Self::draw(rng, self.bridge_radius);
            let tilt = Self::draw(rng, self.tilt);
            let params = LobeParams {
                left_radii,
                right_radii,
                left_offset,
                right_offset,
                bridge_radius: if split { 0.0 } else { bridge },
                tilt,
            };
            if params.validate().is_ok() {
                return Ok(params);
            }
        }
        Err(Error::Parameter("parameter ranges rarely produce valid shapes".into()))
    }
}
