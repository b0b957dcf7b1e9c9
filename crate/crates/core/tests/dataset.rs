use std::f64::consts::PI;

use inr_shape::dataset::*;
use inr_shape::mesh::{icosphere, signed_distance, DistanceIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn two_spheres(r: f64, half_gap: f64, bridge: f64) -> LobeParams {
    LobeParams {
        left_radii: [r; 3],
        right_radii: [r; 3],
        left_offset: [-half_gap, 0.0, 0.0],
        right_offset: [half_gap, 0.0, 0.0],
        bridge_radius: bridge,
        tilt: 0.0,
    }
}

/// Union of two balls and the cylinder joining their centres: the cylinder
/// overlaps each ball in a straight section plus a spherical cap.
fn csg_volume(r: f64, half_gap: f64, rb: f64) -> f64 {
    let a = (r * r - rb * rb).sqrt();
    let overlap_per_ball = 2.0 * PI / 3.0 * (r.powi(3) - a.powi(3));
    2.0 * 4.0 / 3.0 * PI * r.powi(3) + PI * rb * rb * 2.0 * half_gap - 2.0 * overlap_per_ball
}

fn small_population(n: usize, seed: u64, samples: bool) -> PopulationConfig {
    PopulationConfig {
        n,
        seed,
        mesh_resolution: 32,
        measure: MeasureConfig {
            iou_resolution: 32,
            ..MeasureConfig::default()
        },
        samples: samples.then_some(SampleSpec {
            n_surface: 2000,
            n_perturbed: 500,
            sigma: 0.1,
        }),
        ..PopulationConfig::default()
    }
}

#[test]
fn sample_set_has_default_size_and_exact_labels() {
    let sphere = icosphere::<f64>([0.5; 3], 0.3, 3);
    let set = build_sample_set(0, &sphere, &SampleConfig::default(), 7).unwrap();
    assert_eq!(set.len(), 50_000);
    assert_eq!(set.surface_count, 40_000);
    assert!(set.sdf[..40_000].iter().all(|&s| s == 0.0));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let i = 40_000 + rand::Rng::random_range(&mut rng, 0..10_000);
        let fresh = signed_distance(&sphere, set.points[i]).unwrap();
        assert!((fresh - set.sdf[i]).abs() <= 1e-9, "{fresh} vs {}", set.sdf[i]);
    }
}

#[test]
fn perturbed_labels_track_sphere_distance() {
    let sphere = icosphere::<f64>([0.5; 3], 0.3, 4);
    let set = build_sample_set(0, &sphere, &SampleConfig::default(), 11).unwrap();
    // a polyhedral sphere sits inside the true ball by at most its sagitta
    for (p, s) in set.perturbed().take(2000) {
        let d = ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2) + (p[2] - 0.5).powi(2)).sqrt() - 0.3;
        assert!((s - d).abs() < 0.003, "{s} vs {d}");
    }
}

#[test]
fn perturbation_spread_matches_sigma() {
    let sphere = icosphere::<f64>([0.5; 3], 0.3, 2);
    let surface = inr_shape::mesh::sample_surface(&sphere, 40_000, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let moved = perturb_surface_points(&surface, 10_000, 0.1, &mut rng).unwrap();
    for axis in 0..3 {
        let d: Vec<f64> = moved.iter().map(|(i, p)| p[axis] - surface[*i][axis]).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        assert!((var.sqrt() - 0.1).abs() < 0.005, "axis {axis}: std {}", var.sqrt());
    }
}

#[test]
fn open_mesh_cannot_be_sampled() {
    let mut sphere = icosphere::<f64>([0.5; 3], 0.3, 1);
    sphere.faces.pop();
    assert!(build_sample_set(0, &sphere, &SampleConfig::default(), 0).is_err());
}

#[test]
fn sample_file_round_trip() {
    let sphere = icosphere::<f64>([0.5; 3], 0.3, 1);
    let cfg = SampleConfig {
        n_surface: 100,
        n_perturbed: 30,
        sigma: 0.1,
    };
    let set = build_sample_set(4, &sphere, &cfg, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.samples");
    set.write(&path).unwrap();
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 130 * 32);
    assert_eq!(SampleSet::read(4, 100, &path).unwrap(), set);
}

#[test]
fn split_shape_has_two_components_and_no_isthmus() {
    let shape = generate_lobe_shape(&two_spheres(0.15, 0.2, 0.0), 64, &MeasureConfig::default()).unwrap();
    assert!(shape.mesh.is_watertight());
    assert_eq!(shape.mesh.connected_components(), 2);
    assert_eq!(shape.features.isthmus_area, 0.0);
}

#[test]
fn bridged_shape_is_one_component() {
    let shape = generate_lobe_shape(&two_spheres(0.15, 0.2, 0.05), 64, &MeasureConfig::default()).unwrap();
    assert_eq!(shape.mesh.connected_components(), 1);
    let expected = PI * 0.05 * 0.05;
    assert!((shape.features.isthmus_area - expected).abs() / expected < 0.05);
}

#[test]
fn symmetric_params_give_high_symmetry() {
    let p = LobeParams {
        left_radii: [0.08, 0.07, 0.18],
        right_radii: [0.08, 0.07, 0.18],
        left_offset: [-0.21, 0.02, -0.03],
        right_offset: [0.21, 0.02, -0.03],
        bridge_radius: 0.04,
        tilt: 0.0,
    };
    let shape = generate_lobe_shape(&p, 64, &MeasureConfig::default()).unwrap();
    assert!(shape.features.symmetry >= 0.95, "{}", shape.features.symmetry);
}

#[test]
fn two_sphere_volume_matches_csg() {
    for rb in [0.03, 0.06] {
        let shape = generate_lobe_shape(&two_spheres(0.15, 0.2, rb), 64, &MeasureConfig::default()).unwrap();
        let expected = csg_volume(0.15, 0.2, rb);
        let rel = (shape.features.volume - expected).abs() / expected;
        assert!(rel < 0.03, "rb {rb}: {} vs {expected}", shape.features.volume);
    }
}

#[test]
fn escaping_params_are_rejected() {
    let err = generate_lobe_shape(&two_spheres(0.3, 0.2, 0.0), 32, &MeasureConfig::default()).unwrap_err();
    assert_eq!(err.code(), "invalid_parameter");
}

#[test]
fn population_is_deterministic_and_valid() {
    let cfg = small_population(20, 42, false);
    let a = generate_population(&cfg).unwrap();
    let b = generate_population(&cfg).unwrap();
    assert_eq!(a.features(), b.features());
    assert!(a.features().iter().all(|f| f.is_valid()), "{:?}", a.features());
    for s in &a.shapes {
        let bounds = s.mesh.bounds();
        assert!(bounds.min.iter().all(|&v| v >= -1e-9) && bounds.max.iter().all(|&v| v <= 1.0 + 1e-9));
    }
    let other = generate_population(&PopulationConfig { seed: 43, ..cfg }).unwrap();
    assert_ne!(a.features(), other.features());
}

#[test]
fn population_needs_two_shapes() {
    assert!(generate_population(&small_population(1, 0, false)).is_err());
}

#[test]
fn split_fraction_over_large_population() {
    let mut cfg = small_population(1000, 9, false);
    cfg.mesh_resolution = 24;
    let ds = generate_population(&cfg).unwrap();
    let split = ds.features().iter().filter(|f| f.isthmus_area == 0.0).count();
    let frac = split as f64 / 1000.0;
    // binomial(1000, 0.25) has standard deviation 0.0137
    assert!((0.20..=0.30).contains(&frac), "{frac}");
    let flagged = ds.shapes.iter().filter(|s| s.params.unwrap().bridge_radius == 0.0).count();
    assert_eq!(split, flagged);
}

#[test]
fn dataset_files_are_byte_identical_and_reload() {
    let cfg = small_population(3, 5, true);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    generate_population(&cfg).unwrap().save(a.path()).unwrap();
    generate_population(&cfg).unwrap().save(b.path()).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 7);
    for n in &names {
        assert_eq!(std::fs::read(a.path().join(n)).unwrap(), std::fs::read(b.path().join(n)).unwrap());
    }
    let loaded = Dataset::load(a.path()).unwrap();
    let fresh = generate_population(&cfg).unwrap();
    assert_eq!(loaded.features(), fresh.features());
    for (l, f) in loaded.shapes.iter().zip(&fresh.shapes) {
        assert_eq!(l.mesh, f.mesh);
        assert_eq!(l.samples, f.samples);
    }
    let idx = DistanceIndex::new(&loaded.shapes[0].mesh).unwrap();
    let set = loaded.shapes[0].samples.as_ref().unwrap();
    for (p, s) in set.perturbed().take(50) {
        assert!((idx.signed_distance(p).unwrap() - s).abs() <= 1e-9);
    }
}

#[test]
fn imported_meshes_are_normalized_jointly() {
    let small = icosphere::<f64>([10.0, 20.0, 30.0], 2.0, 2);
    let big = icosphere::<f64>([10.0, 20.0, 30.0], 4.0, 2);
    let ds = import_population(vec![small, big], [10.0, 20.0, 30.0], 0, MeasureConfig::default(), None).unwrap();
    let ratio = ds.shapes[1].features.volume / ds.shapes[0].features.volume;
    assert!((ratio - 8.0).abs() < 1e-6);
    assert!((ds.transform.scale[0] - 0.125).abs() < 1e-3);
}
