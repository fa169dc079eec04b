use layercloth::geometry::Point3;
use layercloth::synthgen::shapes::icosphere;
use layercloth::udfnet::{
    load_checkpoint, quantized, sample_training_points, save_checkpoint, udf_loss, udf_loss_value, MlpUdf,
    SampleCategory, SampleCounts,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Relative error of the analytic gradient against central differences,
/// over each layer's parameters as one vector.
fn slice_errors(model: &MlpUdf, pts: &[Point3], gt: &[f64], delta: f64, h: f64) -> Vec<f64> {
    let (_, grads) = udf_loss(model, pts, gt, delta).unwrap();
    let mut start = 0;
    let mut out = Vec::new();
    for layer in model.layers() {
        let len = layer.weight.len() + layer.bias.len();
        let (mut diff, mut scale) = (0.0f64, 0.0f64);
        for i in start..start + len {
            let mut m = model.clone();
            let v = m.param(i);
            m.set_param(i, v + h);
            let up = udf_loss_value(&m, pts, gt, delta);
            m.set_param(i, v - h);
            let down = udf_loss_value(&m, pts, gt, delta);
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.get(i);
            diff += (numeric - analytic).powi(2);
            scale = scale.max(numeric.abs()).max(analytic.abs());
        }
        out.push(diff.sqrt() / (scale * (len as f64).sqrt()).max(1e-12));
        start += len;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn backprop_matches_finite_differences(seed in any::<u64>()) {
        let model = MlpUdf::new(2, &[12, 10], 1.0, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let pts: Vec<Point3> = (0..24)
            .map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let gt: Vec<f64> = (0..24).map(|_| rng.random_range(0.0..0.5)).collect();
        for err in slice_errors(&model, &pts, &gt, 1.0, 1e-4) {
            prop_assert!(err < 1e-4, "relative error {err}");
        }
    }
}

#[test]
fn sampler_respects_categories_and_seed() {
    let sphere = icosphere(0.3, 3);
    let all: Vec<usize> = (0..sphere.vertex_count()).collect();
    let counts = SampleCounts {
        on_surface: 500,
        near_surface: 500,
        in_box: 200,
        sigma: 0.01,
    };
    let s = sample_training_points(&sphere, &all, &counts, 4).unwrap();
    assert_eq!(s.len(), 1200);
    assert_eq!(s, sample_training_points(&sphere, &all, &counts, 4).unwrap());
    for ((p, &gt), c) in s.points.iter().zip(&s.gt).zip(&s.categories) {
        // Sphere facets sit slightly inside the true sphere.
        let approx = (p.coords.norm() - 0.3).abs();
        assert!((gt - approx).abs() < 0.01, "{gt} vs {approx}");
        if *c == SampleCategory::OnSurface {
            assert_eq!(gt, 0.0);
        }
    }
}

#[test]
fn checkpoint_reload_equals_quantized_model() {
    let dir = tempfile::tempdir().unwrap();
    let model = MlpUdf::new(3, &[16, 8], 0.01, 77).unwrap();
    let path = dir.path().join("m.ckpt");
    save_checkpoint(&path, &model).unwrap();
    let back = load_checkpoint(&path).unwrap();
    assert_eq!(back, quantized(&model));
    assert_eq!(quantized(&back), back);
}
