use std::f64::consts::PI;

use inr_shape::mesh::measure::signed_volume;
use inr_shape::mesh::{
    box_mesh, chamfer_distance, chamfer_distance_seeded, cross_section_area, icosphere, marching_cubes, mesh_volume,
    mirror_iou, reflect, sample_surface, DistanceIndex, ScalarGrid, TriMesh,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sphere_sdf(c: [f64; 3], r: f64) -> impl Fn([f64; 3]) -> f64 {
    move |p| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2) + (p[2] - c[2]).powi(2)).sqrt() - r
}

/// Ray-parity inside test (Möller–Trumbore), independent of the winding number.
fn parity_inside(mesh: &TriMesh<f64>, p: [f64; 3], dir: [f64; 3]) -> bool {
    let mut hits = 0;
    for [a, b, c] in mesh.triangles() {
        let e1 = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let e2 = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
        let h = [dir[1] * e2[2] - dir[2] * e2[1], dir[2] * e2[0] - dir[0] * e2[2], dir[0] * e2[1] - dir[1] * e2[0]];
        let det = e1[0] * h[0] + e1[1] * h[1] + e1[2] * h[2];
        if det.abs() < 1e-14 {
            continue;
        }
        let s = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
        let u = (s[0] * h[0] + s[1] * h[1] + s[2] * h[2]) / det;
        if !(0.0..=1.0).contains(&u) {
            continue;
        }
        let q = [s[1] * e1[2] - s[2] * e1[1], s[2] * e1[0] - s[0] * e1[2], s[0] * e1[1] - s[1] * e1[0]];
        let v = (dir[0] * q[0] + dir[1] * q[1] + dir[2] * q[2]) / det;
        if v < 0.0 || u + v > 1.0 {
            continue;
        }
        let t = (e2[0] * q[0] + e2[1] * q[1] + e2[2] * q[2]) / det;
        if t > 0.0 {
            hits += 1;
        }
    }
    hits % 2 == 1
}

#[test]
fn icosphere_signed_distance_matches_analytic_sphere() {
    let sphere = icosphere::<f64>([0.5; 3], 0.3, 4);
    let idx = DistanceIndex::new(&sphere).unwrap();
    assert!((idx.signed_distance([0.5; 3]).unwrap() + 0.3).abs() < 2e-3);
    assert!((idx.signed_distance([0.9, 0.5, 0.5]).unwrap() - 0.1).abs() < 2e-3);
    for v in sphere.vertices.iter().step_by(97) {
        assert_eq!(idx.signed_distance(*v).unwrap(), 0.0);
    }
}

#[test]
fn winding_sign_agrees_with_ray_parity() {
    let a = icosphere::<f64>([0.5, 0.5, 0.5], 0.3, 3);
    let grid = ScalarGrid::unit_cube_cell_centers(32, |p: [f64; 3]| {
        let l = sphere_sdf([0.3, 0.5, 0.5], 0.15)(p);
        let r = sphere_sdf([0.7, 0.55, 0.5], 0.12)(p);
        l.min(r)
    })
    .unwrap();
    let blobs = marching_cubes(&grid, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for mesh in [&a, &blobs, &box_mesh::<f64>([0.2, 0.3, 0.25], [0.8, 0.6, 0.7])] {
        let idx = DistanceIndex::new(mesh).unwrap();
        let mut checked = 0;
        while checked < 1000 {
            let p = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
            let d = idx.signed_distance(p).unwrap();
            if d.abs() < 1e-6 {
                continue;
            }
            let dir = [0.5727, 0.3104, 0.7583];
            assert_eq!(d < 0.0, parity_inside(mesh, p, dir), "point {p:?}, d = {d}");
            checked += 1;
        }
    }
}

#[test]
fn marching_cubes_sphere_volume_and_orientation() {
    let grid = ScalarGrid::unit_cube_cell_centers(64, sphere_sdf([0.5; 3], 0.3)).unwrap();
    let mesh = marching_cubes(&grid, 0.0).unwrap();
    assert!(mesh.is_watertight());
    assert!(signed_volume(&mesh) > 0.0, "faces must be wound outward");
    let exact = 4.0 / 3.0 * PI * 0.3f64.powi(3);
    let v = mesh_volume(&mesh).unwrap();
    assert!((v - exact).abs() / exact < 0.02, "{v} vs {exact}");
    // outward winding makes the mesh SDF negative at the centre
    let idx = DistanceIndex::new(&mesh).unwrap();
    assert!(idx.signed_distance([0.5; 3]).unwrap() < -0.29);
}

#[test]
fn marching_cubes_empty_and_two_blob_cases() {
    let positive = ScalarGrid::unit_cube_cell_centers(16, |_p: [f64; 3]| 1.0).unwrap();
    assert!(marching_cubes(&positive, 0.0).unwrap().is_empty());
    let grid = ScalarGrid::unit_cube_cell_centers(48, |p: [f64; 3]| {
        sphere_sdf([0.3, 0.5, 0.5], 0.12)(p).min(sphere_sdf([0.7, 0.5, 0.5], 0.12)(p))
    })
    .unwrap();
    let mesh = marching_cubes(&grid, 0.0).unwrap();
    assert_eq!(mesh.connected_components(), 2);
    assert!(mesh.is_watertight());
}

#[test]
fn marching_cubes_caps_solids_touching_the_border() {
    let grid = ScalarGrid::unit_cube_cell_centers(20, sphere_sdf([0.0, 0.5, 0.5], 0.4)).unwrap();
    let mesh = marching_cubes(&grid, 0.0).unwrap();
    assert!(mesh.is_watertight());
    assert!(mesh.bounds().min[0] >= -1e-12);
}

#[test]
fn marching_cubes_is_watertight_on_random_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..40 {
        let grid = ScalarGrid::unit_cube_cell_centers(8, |_p: [f64; 3]| 0.0).unwrap();
        let values = grid.values.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        let grid = ScalarGrid::new(grid.resolution, grid.origin, grid.spacing, values).unwrap();
        let mesh = marching_cubes(&grid, 0.0).unwrap();
        assert!(mesh.is_watertight(), "{:?}", mesh.topology());
    }
}

#[test]
fn icosphere_volume_and_cross_section() {
    let sphere = icosphere::<f64>([0.5; 3], 0.3, 4);
    let v = mesh_volume(&sphere).unwrap();
    assert!((v - 0.11310).abs() / 0.11310 < 0.01, "{v}");
    assert_eq!(mesh_volume(&sphere.flipped()).unwrap(), v);
    let a = cross_section_area(&sphere, 0, 0.5).unwrap();
    let exact = PI * 0.09;
    assert!((a - exact).abs() / exact < 0.01, "{a} vs {exact}");
    assert_eq!(cross_section_area(&sphere, 0, 0.85).unwrap(), 0.0);
}

#[test]
fn split_lobes_have_no_midplane_section() {
    let lobes = icosphere::<f64>([0.3, 0.5, 0.5], 0.15, 3).merged(&icosphere::<f64>([0.7, 0.5, 0.5], 0.15, 3));
    assert_eq!(cross_section_area(&lobes, 0, 0.5).unwrap(), 0.0);
}

#[test]
fn cross_section_sweep_is_continuous() {
    let sphere = icosphere::<f64>([0.5; 3], 0.3, 4);
    let analytic = |x: f64| PI * (0.09 - (x - 0.5).powi(2)).max(0.0);
    let step = 0.002;
    let mut prev = cross_section_area(&sphere, 0, 0.21).unwrap();
    let mut x = 0.21 + step;
    while x < 0.79 {
        let a = cross_section_area(&sphere, 0, x).unwrap();
        // bound: slope of the analytic area over one step
        let bound = (analytic(x) - analytic(x - step)).abs() + 1e-3;
        assert!((a - prev).abs() <= 5.0 * bound, "jump at {x}: {prev} -> {a}");
        prev = a;
        x += step;
    }
}

#[test]
fn mirrored_congruent_lobes_are_symmetric() {
    let left = icosphere::<f64>([0.3, 0.45, 0.5], 0.12, 3);
    let right = reflect(&left, 0, 0.5);
    let both = left.merged(&right);
    let s = mirror_iou(&both, 0, 0.5, 64).unwrap();
    assert!(s.iou >= 0.95, "{s:?}");
}

#[test]
fn mirror_iou_is_invariant_under_reflection() {
    let left = icosphere::<f64>([0.3, 0.45, 0.5], 0.12, 3);
    let right = icosphere::<f64>([0.72, 0.5, 0.45], 0.1, 3);
    let shape = left.merged(&right);
    let a = mirror_iou(&shape, 0, 0.5, 64).unwrap();
    let b = mirror_iou(&reflect(&shape, 0, 0.5), 0, 0.5, 64).unwrap();
    assert!((a.iou - b.iou).abs() < 1e-12, "{a:?} vs {b:?}");
    assert!(a.iou > 0.2 && a.iou < 0.9);
}

#[test]
fn concentric_sphere_chamfer_is_the_radius_gap() {
    let a = icosphere::<f64>([0.5; 3], 0.3, 5);
    let b = icosphere::<f64>([0.5; 3], 0.31, 5);
    let d = chamfer_distance(&a, &b, 20_000, 5).unwrap();
    assert!((d - 0.01).abs() < 0.001, "{d}");
}

#[test]
fn chamfer_is_invariant_under_joint_rigid_motion() {
    let a = icosphere::<f64>([0.5; 3], 0.3, 2);
    let b = box_mesh::<f64>([0.25, 0.3, 0.2], [0.75, 0.7, 0.8]);
    let (s, c) = (0.6f64.sin(), 0.6f64.cos());
    let motion = |p: [f64; 3]| [c * p[0] - s * p[1] + 0.3, s * p[0] + c * p[1] - 0.1, p[2] + 0.25];
    let d0 = chamfer_distance(&a, &b, 3000, 8).unwrap();
    let d1 = chamfer_distance(&a.map_vertices(motion), &b.map_vertices(motion), 3000, 8).unwrap();
    assert!((d0 - d1).abs() < 1e-9, "{d0} vs {d1}");
}

#[test]
fn surface_samples_lie_on_the_surface() {
    let sphere = icosphere::<f64>([0.5; 3], 0.3, 3);
    let idx = DistanceIndex::new(&sphere).unwrap();
    for p in sample_surface(&sphere, 500, 2).unwrap() {
        assert!(idx.signed_distance(p).unwrap().abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn chamfer_swap_symmetry(sa in any::<u64>(), sb in any::<u64>(), r in 0.1f64..0.3) {
        let a = icosphere::<f64>([0.5; 3], 0.3, 2);
        let b = icosphere::<f64>([0.45, 0.5, 0.55], r, 2);
        let ab = chamfer_distance_seeded(&a, &b, 200, sa, sb).unwrap();
        let ba = chamfer_distance_seeded(&b, &a, 200, sb, sa).unwrap();
        prop_assert_eq!(ab.to_bits(), ba.to_bits());
    }
}
