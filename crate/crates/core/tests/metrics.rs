use layercloth::geometry::{Point3, TriMesh};
use layercloth::metrics::{
    chamfer_distance, front_back_cameras, intersection_ratio, intersection_ratio_in_views, normal_consistency,
};
use layercloth::rasterview::Camera;
use layercloth::synthgen::shapes::{grid_patch, icosphere};
use layercloth::Error;
use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn shifted(m: &TriMesh, x: f64, y: f64, z: f64) -> TriMesh {
    m.transformed(&Isometry3::translation(x, y, z))
}

fn bumpy_sphere(seed: u64) -> TriMesh {
    let mut m = icosphere(0.2, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in m.vertices_mut() {
        *v = Point3::from(v.coords * (1.0 + rng.random_range(-0.05..0.05)));
    }
    m
}

#[test]
fn identical_meshes_score_perfectly() {
    let a = bumpy_sphere(1);
    assert!(chamfer_distance(&a, &a, 5000, 3).unwrap() < 1e-6);
    assert_eq!(normal_consistency(&a, &a, 5000, 3).unwrap(), 1.0);
}

#[test]
fn offset_planes_are_ten_millimeters_apart() {
    let a = grid_patch(1.0, 4);
    let b = shifted(&a, 0.0, 0.0, 0.010);
    let cd = chamfer_distance(&a, &b, 10_000, 0).unwrap();
    assert!((cd - 10.0).abs() < 0.2, "{cd}");
}

#[test]
fn chamfer_is_exactly_symmetric_and_deterministic() {
    let a = bumpy_sphere(2);
    let b = shifted(&bumpy_sphere(3), 0.01, 0.0, 0.0);
    let ab = chamfer_distance(&a, &b, 3000, 9).unwrap();
    assert_eq!(ab, chamfer_distance(&b, &a, 3000, 9).unwrap());
    assert_eq!(ab, chamfer_distance(&a, &b, 3000, 9).unwrap());
    let nab = normal_consistency(&a, &b, 3000, 9).unwrap();
    assert_eq!(nab, normal_consistency(&b, &a, 3000, 9).unwrap());
    assert!((0.0..=1.0).contains(&nab));
}

#[test]
fn chamfer_agrees_with_dense_sampling() {
    let a = bumpy_sphere(4);
    let b = shifted(&bumpy_sphere(5), 0.005, 0.0, 0.0);
    let sparse = chamfer_distance(&a, &b, 20_000, 1).unwrap();
    let dense = chamfer_distance(&a, &b, 200_000, 2).unwrap();
    assert!((sparse - dense).abs() < 0.01 * dense, "{sparse} vs {dense}");
}

#[test]
fn flipped_winding_does_not_matter() {
    let a = grid_patch(1.0, 3);
    let mut b = a.clone();
    for f in 0..b.face_count() {
        b.flip_face(f);
    }
    assert_eq!(normal_consistency(&a, &b, 2000, 0).unwrap(), 1.0);
}

#[test]
fn slightly_rotated_sphere_keeps_normals() {
    let a = icosphere(0.3, 5);
    let rot = Isometry3::rotation(Vector3::new(0.3, 1.0, 0.2).normalize() * 5f64.to_radians());
    let b = a.transformed(&rot);
    let nc = normal_consistency(&a, &b, 20_000, 0).unwrap();
    assert!((1.0 - nc) < 1e-3, "{nc}");
}

#[test]
fn intersection_ratio_limits() {
    let outer = icosphere(0.3, 2);
    let inner = icosphere(0.2, 2);
    assert_eq!(intersection_ratio(&outer, &[&inner], 128).unwrap(), 0.0);

    let quad = grid_patch(0.5, 2);
    let cage = icosphere(1.0, 2);
    assert_eq!(intersection_ratio(&quad, &[&cage], 128).unwrap(), 100.0);

    // Seen edge-on the quad covers nothing.
    let edge_on = quad.transformed(&Isometry3::rotation(Vector3::x() * std::f64::consts::FRAC_PI_2));
    assert!(matches!(
        intersection_ratio(&edge_on, &[], 64),
        Err(Error::UndefinedMetric(_))
    ));
}

#[test]
fn intersection_ratio_ignores_rigid_motion_of_scene_and_cameras() {
    let outer = shifted(&icosphere(0.3, 3), 0.0, 0.0, 0.0);
    let inner = shifted(&icosphere(0.25, 3), 0.0, 0.0, 0.07);
    let bounds = outer.bounds().union(&inner.bounds());
    let views = front_back_cameras(&bounds, 256).unwrap();
    let base = intersection_ratio_in_views(&outer, &[&inner], &views).unwrap();
    assert!(base > 0.0);
    let motion = Isometry3::from_parts(
        Translation3::new(0.25, -0.5, 1.0),
        UnitQuaternion::from_euler_angles(0.0, 0.0, std::f64::consts::FRAC_PI_2),
    );
    let moved_views: Vec<Camera> = views
        .iter()
        .map(|c| {
            let mut m = c.clone();
            m.extrinsic = c.extrinsic * motion.inverse().to_homogeneous();
            m
        })
        .collect();
    let moved = intersection_ratio_in_views(&outer.transformed(&motion), &[&inner.transformed(&motion)], &moved_views)
        .unwrap();
    assert!((moved - base).abs() < 0.5, "{base} vs {moved}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn occluders_never_lower_the_ratio(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut jitter = |s: f64| rng.random_range(-s..s);
        let outer = shifted(&icosphere(0.3, 2), jitter(0.05), jitter(0.05), jitter(0.05));
        let first = shifted(&icosphere(0.25, 2), jitter(0.1), jitter(0.1), jitter(0.1));
        let second = shifted(&icosphere(0.2, 2), jitter(0.15), jitter(0.15), jitter(0.15));
        let views = front_back_cameras(&outer.bounds().union(&first.bounds()).union(&second.bounds()), 128).unwrap();
        let one = intersection_ratio_in_views(&outer, &[&first], &views).unwrap();
        let two = intersection_ratio_in_views(&outer, &[&first, &second], &views).unwrap();
        prop_assert!(two >= one);
    }
}
