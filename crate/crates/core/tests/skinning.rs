use layercloth::geometry::Point3;
use layercloth::skinning::{lbs_forward, lbs_inverse, load_pose, save_pose, transfer_weights, WeightField};
use layercloth::synthgen::{make_body, perturb_pose, FixtureSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_weights(n: usize, joints: usize, rng: &mut ChaCha8Rng) -> WeightField {
    let mut data = Vec::with_capacity(n * joints);
    for _ in 0..n {
        let row: Vec<f64> = (0..joints).map(|_| rng.random::<f64>()).collect();
        let s: f64 = row.iter().sum();
        data.extend(row.iter().map(|w| w / s));
    }
    WeightField::new(joints, data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn inverse_undoes_forward(seed in any::<u64>(), magnitude in 0.0f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pivots: Vec<Point3> = (0..4).map(|j| Point3::new(0.0, 0.25 * j as f64, 0.0)).collect();
        let pose = perturb_pose(&pivots, magnitude, seed).unwrap();
        let pts: Vec<Point3> = (0..200)
            .map(|_| Point3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.2..1.2), rng.random_range(-0.5..0.5)))
            .collect();
        let w = random_weights(pts.len(), 4, &mut rng);
        let posed = lbs_forward(&pts, &w, &pose).unwrap();
        let back = lbs_inverse(&posed, &w, &pose).unwrap();
        for (a, b) in back.iter().zip(&pts) {
            prop_assert!((a - b).norm() < 1e-9);
        }
    }
}

#[test]
fn body_weights_transfer_to_itself_unchanged() {
    let body = make_body(&FixtureSpec::small()).unwrap().body;
    assert_eq!(transfer_weights(&body, &body.mesh).unwrap(), body.weights);
}

#[test]
fn pose_file_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let pivots: Vec<Point3> = (0..5).map(|j| Point3::new(0.1 * j as f64, 0.0, 0.3)).collect();
    let pose = perturb_pose(&pivots, 0.7, 42).unwrap();
    let path = dir.path().join("pose.json");
    save_pose(&path, &pose).unwrap();
    assert_eq!(load_pose(&path).unwrap(), pose);
}
