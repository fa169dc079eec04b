//! Acceptance suite: one PASS/FAIL line per criterion, measured values
//! alongside. Runs as its own test binary (`cargo test --test acceptance`).

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use layercloth::extraction::{back_faces, bake_grid, marching_cubes, orient_back_faces, DEFAULT_TAU};
use layercloth::geometry::{
    closest_point_on_triangle, ray_triangle, winding_number_exact, Aabb, Point3, SpatialIndex, TriMesh, Vec3,
    RAY_T_MIN,
};
use layercloth::layering::{remove_penetrations, LayerStack, StackLayer, DEFAULT_EPSILON};
use layercloth::metrics::{chamfer_distance, intersection_ratio, normal_consistency};
use layercloth::pipeline::{artifacts, run_pipeline, write_fixture, FixtureOptions, MetricParams, Params, StageRange};
use layercloth::rasterview::{sample_turntable_views, vote_vertex_labels, Camera, LabelMask, VISIBILITY_TOLERANCE};
use layercloth::skinning::{lbs_forward, lbs_inverse, Pose, WeightField};
use layercloth::synthgen::shapes::{grid_patch, icosphere};
use layercloth::synthgen::{make_body, make_fixture, FixtureSpec};
use layercloth::udfnet::{
    encode_batch, sample_training_points, train_udf, udf_loss, udf_loss_value, MlpUdf, SampleCounts, TrainConfig, DEFAULT_DELTA,
    DEFAULT_HIDDEN, DEFAULT_PE_COUNT,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn single_thread<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn garment_part(mesh: &TriMesh, set: &[usize]) -> TriMesh {
    let mut in_set = vec![false; mesh.vertex_count()];
    for &v in set {
        in_set[v] = true;
    }
    let keep = mesh.faces_within(&in_set);
    mesh.submesh(|f| keep[f]).0
}

fn random_rotation_pose(rng: &mut ChaCha8Rng, joints: usize, max_angle: f64) -> Pose {
    let bones = (0..joints)
        .map(|_| {
            let axis = nalgebra::Unit::new_normalize(Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ));
            let rot = nalgebra::UnitQuaternion::from_axis_angle(&axis, rng.random_range(-max_angle..max_angle));
            let t = nalgebra::Translation3::new(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
            );
            nalgebra::Isometry3::from_parts(t, rot).to_homogeneous()
        })
        .collect();
    Pose::new(bones).unwrap()
}

fn skinning_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let n = 1000;
    let pts: Vec<Point3> = (0..n)
        .map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let mut data = Vec::with_capacity(4 * n);
    for _ in 0..n {
        let row: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
        let s: f64 = row.iter().sum();
        data.extend(row.iter().map(|w| w / s));
    }
    let weights = WeightField::new(4, data).unwrap();
    let pose = random_rotation_pose(&mut rng, 4, 60f64.to_radians());
    let start = Instant::now();
    let rest = lbs_inverse(&pts, &weights, &pose).unwrap();
    let back = lbs_forward(&rest, &weights, &pose).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let worst = back.iter().zip(&pts).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    (worst < 1e-6 && secs < 1.0, format!("max error {worst:.2e} m in {secs:.3} s"))
}

struct StackFixture {
    stack: LayerStack,
    resolved: Vec<TriMesh>,
    seconds: f64,
}

fn penetration_fixture() -> StackFixture {
    // Deep enough that the seeded spikes show through the outer layer.
    let spec = FixtureSpec {
        penetration_depth: 0.030,
        ..FixtureSpec::default()
    };
    let fx = make_fixture(&spec).unwrap();
    let layers = fx
        .layers
        .iter()
        .map(|l| StackLayer {
            mesh: l.mesh.clone(),
            garment_set: l.garment_set.clone(),
        })
        .collect();
    let stack = LayerStack::new(fx.body.body.clone(), layers, DEFAULT_EPSILON).unwrap();
    let start = Instant::now();
    let resolved = single_thread(|| remove_penetrations(&stack)).unwrap();
    StackFixture {
        seconds: start.elapsed().as_secs_f64(),
        stack,
        resolved,
    }
}

fn penetration_removal(fx: &StackFixture) -> Outcome {
    use rayon::prelude::*;
    let mut contained = 0;
    let mut checked = 0;
    for (k, layer) in fx.stack.layers.iter().enumerate() {
        let previous = if k == 0 { &fx.stack.body.mesh } else { &fx.resolved[k - 1] };
        let verts = fx.resolved[k].vertices();
        checked += layer.garment_set.len();
        contained += layer
            .garment_set
            .par_iter()
            .filter(|&&v| winding_number_exact(previous, &verts[v]) > 0.5)
            .count();
    }
    let verts = fx.stack.layers[0].mesh.vertex_count();
    (
        contained == 0 && fx.seconds < 60.0,
        format!(
            "{contained} of {checked} garment vertices contained (exact winding); {verts} vertices/layer; removal {:.1} s single-threaded",
            fx.seconds
        ),
    )
}

fn stack_ir(body: &TriMesh, layers: &[TriMesh], sets: &[Vec<usize>], res: u32) -> Vec<f64> {
    (0..layers.len())
        .map(|k| {
            let outer = garment_part(&layers[k], &sets[k]);
            let mut inner: Vec<&TriMesh> = vec![body];
            inner.extend(layers[..k].iter());
            intersection_ratio(&outer, &inner, res).unwrap()
        })
        .collect()
}

fn ir_trend(fx: &StackFixture) -> Outcome {
    let sets: Vec<Vec<usize>> = fx.stack.layers.iter().map(|l| l.garment_set.clone()).collect();
    let before_meshes: Vec<TriMesh> = fx.stack.layers.iter().map(|l| l.mesh.clone()).collect();
    let res = layercloth::metrics::DEFAULT_IR_RESOLUTION;
    let before = stack_ir(&fx.stack.body.mesh, &before_meshes, &sets, res);
    let after = stack_ir(&fx.stack.body.mesh, &fx.resolved, &sets, res);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (b, a) = (mean(&before), mean(&after));
    (
        b >= 5.0 && a < 0.1 && b >= 50.0 * a,
        format!("IR before {b:.3}% (per layer {before:.3?}), after {a:.4}% (per layer {after:.4?})"),
    )
}

fn udf_fitting() -> Outcome {
    let sphere = icosphere(0.3, 5);
    let all: Vec<usize> = (0..sphere.vertex_count()).collect();
    let counts = SampleCounts::default();
    let train = sample_training_points(&sphere, &all, &counts, 1).unwrap();
    let held_out = sample_training_points(
        &sphere,
        &all,
        &SampleCounts {
            on_surface: 20_000,
            near_surface: 20_000,
            in_box: 10_000,
            ..counts
        },
        2,
    )
    .unwrap();
    let config = TrainConfig {
        batch_size: 512,
        iterations: 5000,
        seed: 3,
        ..TrainConfig::default()
    };
    let start = Instant::now();
    let fitted = train_udf(MlpUdf::with_defaults(4), &train, &config).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let pred = fitted.model.eval_batch(&held_out.points);
    let delta = DEFAULT_DELTA;
    let err = pred
        .iter()
        .zip(&held_out.gt)
        .map(|(f, g)| (f.min(delta) - g.min(delta)).abs())
        .sum::<f64>()
        / pred.len() as f64;
    // Same seed, shorter run: the shared prefix of the trajectory must match.
    let short = train_udf(MlpUdf::with_defaults(4), &train, &TrainConfig { iterations: 200, ..config.clone() }).unwrap();
    let deterministic = short.loss_history[..] == fitted.loss_history[..200];
    (
        err < 0.002 && deterministic && secs < 600.0,
        format!(
            "held-out error {:.3} mm, deterministic {deterministic}, {secs:.0} s (batch 512)",
            err * 1000.0
        ),
    )
}

/// ReLU on/off pattern of every hidden unit over a batch, from a forward
/// pass written independently of the model's own.
fn relu_pattern(model: &MlpUdf, encoded: &ndarray::Array2<f64>) -> Vec<bool> {
    let mut act = encoded.clone();
    let mut pattern = Vec::new();
    let last = model.layers().len() - 1;
    for layer in &model.layers()[..last] {
        let z = act.dot(&layer.weight.t()) + &layer.bias;
        pattern.extend(z.iter().map(|&v| v > 0.0));
        act = z.mapv(|v| v.max(0.0));
    }
    pattern
}

fn gradient_check() -> Outcome {
    let model = MlpUdf::new(DEFAULT_PE_COUNT, &DEFAULT_HIDDEN, DEFAULT_DELTA, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pts: Vec<Point3> = (0..64)
        .map(|_| Point3::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)))
        .collect();
    let encoded = encode_batch(&pts, DEFAULT_PE_COUNT);
    let gt: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..0.2)).collect();
    // A clamp above every prediction keeps the loss smooth in all parameters.
    let delta = 10.0;
    let (_, grads) = udf_loss(&model, &pts, &gt, delta).unwrap();
    let h = 1e-4;
    let mut offsets = vec![0];
    for l in model.layers() {
        offsets.push(offsets.last().unwrap() + l.weight.len() + l.bias.len());
    }
    let mut errors = Vec::new();
    let mut straddled = 0;
    for s in 0..model.layers().len() {
        let (lo, hi) = (offsets[s], offsets[s + 1]);
        let (mut diff, mut norm, mut used) = (0.0, 0.0, 0);
        while used < 24 {
            let i = rng.random_range(lo..hi);
            let mut up_m = model.clone();
            let mut down_m = model.clone();
            let v = model.param(i);
            up_m.set_param(i, v + h);
            down_m.set_param(i, v - h);
            // A central difference across a ReLU kink is not a derivative.
            if relu_pattern(&up_m, &encoded) != relu_pattern(&down_m, &encoded) {
                straddled += 1;
                continue;
            }
            let numeric =
                (udf_loss_value(&up_m, &pts, &gt, delta) - udf_loss_value(&down_m, &pts, &gt, delta)) / (2.0 * h);
            diff += (numeric - grads.get(i)).powi(2);
            norm += numeric.powi(2).max(grads.get(i).powi(2));
            used += 1;
        }
        errors.push(diff.sqrt() / norm.sqrt().max(1e-15));
    }
    let worst = errors.iter().copied().fold(0.0, f64::max);
    (
        worst < 1e-4 && errors.len() >= 3,
        format!(
            "{} slices x 24 parameters, worst relative error {worst:.2e} (per slice {}); {straddled} draws skipped for crossing a ReLU kink",
            errors.len(),
            errors.iter().map(|e| format!("{e:.1e}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn cube(half: f64) -> Aabb {
    Aabb::from_points(&[Point3::new(-half, -half, -half), Point3::new(half, half, half)])
}

fn extraction() -> Outcome {
    let r = 0.3;
    let tau = DEFAULT_TAU;
    let f = |p: &Point3| (p.coords.norm() - r).abs();
    let mut details = Vec::new();
    let mut ok = true;
    let mut errors = Vec::new();
    for res in [128, 256] {
        let g = bake_grid(f, &cube(0.33), res).unwrap();
        let m = marching_cubes(&g, tau).unwrap();
        let (mut outer, mut inner) = (0.0f64, 0.0f64);
        for v in m.vertices() {
            let rho = v.coords.norm();
            if rho > r {
                outer = outer.max((rho - (r + tau)).abs());
            } else {
                inner = inner.max((rho - (r - tau)).abs());
            }
        }
        ok &= outer < 0.5 * g.cell && inner < 0.5 * g.cell;
        let level = |p: &Point3| {
            let rho = p.coords.norm();
            (rho - (r + tau)).abs().min((rho - (r - tau)).abs())
        };
        let mut haus = 0.0f64;
        for fi in 0..m.face_count() {
            let [a, b, c] = m.triangle(fi);
            for p in [a, b, c, Point3::from((a.coords + b.coords + c.coords) / 3.0)] {
                haus = haus.max(level(&p));
            }
        }
        let index = SpatialIndex::new(&m).unwrap();
        for s in icosphere(1.0, 4).vertices() {
            for rad in [r + tau, r - tau] {
                haus = haus.max(index.unsigned_distance(&Point3::from(s.coords * rad)));
            }
        }
        errors.push(haus);
        details.push(format!("{res}^3: shell error {:.2e}/{:.2e} (half cell {:.2e})", outer, inner, 0.5 * g.cell));
    }
    let ratio = errors[0] / errors[1];
    ok &= ratio >= 1.8;
    (ok, format!("{}; Hausdorff ratio {ratio:.2}", details.join(", ")))
}

fn orientation() -> Outcome {
    let g = bake_grid(|p: &Point3| (p.coords.norm() - 0.3).abs(), &cube(0.33), 96).unwrap();
    let shell = marching_cubes(&g, DEFAULT_TAU).unwrap();
    let joints = [Point3::origin()];
    let d = Vec3::new(0.0, 0.0, -1.0);
    let xi = 0.005;
    let flags = back_faces(&shell, &joints, &d, xi).unwrap();
    // Brute force: every vertex of the face lies more than xi behind its
    // nearest joint along d.
    let behind = |v: &Point3| {
        let j = joints
            .iter()
            .min_by(|a, b| (*a - v).norm().total_cmp(&(*b - v).norm()))
            .unwrap();
        (v - j).dot(&d) > xi
    };
    let direct: Vec<bool> = shell.faces().iter().map(|f| f.iter().all(|&i| behind(&shell.vertices()[i]))).collect();
    let once = orient_back_faces(&shell, &joints, &d, xi).unwrap();
    let twice = orient_back_faces(&once, &joints, &d, xi).unwrap();
    let flipped = flags.iter().filter(|&&b| b).count();
    let same = flags == direct;
    let restored = twice == shell;
    (
        same && restored,
        format!("{flipped} of {} faces flipped, matches brute force {same}, involution {restored}", shell.face_count()),
    )
}

fn metrics_sanity() -> Outcome {
    let a = icosphere(0.3, 4);
    let cd_self = chamfer_distance(&a, &a, 100_000, 1).unwrap();
    let nc_self = normal_consistency(&a, &a, 100_000, 1).unwrap();
    let p = grid_patch(1.0, 20);
    let q = p.transformed(&nalgebra::Isometry3::translation(0.0, 0.0, 0.010));
    let cd_planes = chamfer_distance(&p, &q, 100_000, 2).unwrap();
    let mut monotone = 0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let outer = icosphere(0.3, 3);
        let mut inner = vec![icosphere(rng.random_range(0.2..0.29), 3)];
        let base = intersection_ratio(&outer, &inner.iter().collect::<Vec<_>>(), 256).unwrap();
        let c = Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
        inner.push(icosphere(rng.random_range(0.05..0.15), 2).transformed(&nalgebra::Isometry3::translation(c.x, c.y, c.z)));
        let more = intersection_ratio(&outer, &inner.iter().collect::<Vec<_>>(), 256).unwrap();
        monotone += usize::from(more >= base);
    }
    let ok = cd_self < 1e-6 && nc_self == 1.0 && (cd_planes - 10.0).abs() <= 0.2 && monotone == 20;
    (
        ok,
        format!(
            "CD(a,a) {cd_self:.1e} mm, NC(a,a) {nc_self}, planes CD {cd_planes:.3} mm, IR monotone {monotone}/20"
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let meshes = [
        icosphere(0.3, 3),
        make_body(&FixtureSpec::small()).unwrap().body.mesh,
        grid_patch(1.0, 16).transformed(&nalgebra::Isometry3::rotation(Vec3::new(0.3, 0.2, 0.0))),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut worst_cp, mut ray_bad, mut contain_bad, mut total) = (0.0f64, 0, 0, 0);
    for (mi, mesh) in meshes.iter().enumerate() {
        let index = SpatialIndex::new(mesh).unwrap();
        let b = mesh.bounds().inflated(0.2 * mesh.bounds().diagonal());
        for _ in 0..1000 {
            total += 1;
            let q = Point3::new(
                rng.random_range(b.min.x..b.max.x),
                rng.random_range(b.min.y..b.max.y),
                rng.random_range(b.min.z..b.max.z),
            );
            let brute = (0..mesh.face_count())
                .map(|f| {
                    let [a, b, c] = mesh.triangle(f);
                    (closest_point_on_triangle(&q, &a, &b, &c) - q).norm()
                })
                .fold(f64::INFINITY, f64::min);
            worst_cp = worst_cp.max((index.closest_point(&q).distance - brute).abs());

            let dir = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                .normalize();
            let fast = index.ray_intersections(&q, &dir).unwrap();
            let mut slow: Vec<(f64, usize)> = (0..mesh.face_count())
                .filter_map(|f| {
                    let [a, b, c] = mesh.triangle(f);
                    ray_triangle(&q, &dir, &a, &b, &c, 0.0).filter(|&t| t > RAY_T_MIN).map(|t| (t, f))
                })
                .collect();
            slow.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let rays_agree =
                fast.len() == slow.len() && fast.iter().zip(&slow).all(|(h, s)| h.face == s.1 && (h.t - s.0).abs() < 1e-9);
            ray_bad += usize::from(!rays_agree);

            if mi < 2 {
                let exact = winding_number_exact(mesh, &q) > 0.5;
                contain_bad += usize::from(index.contains_point(&q) != exact);
            }
        }
    }
    (
        worst_cp < 1e-9 && ray_bad == 0 && contain_bad == 0,
        format!(
            "{total} queries: closest-point max diff {worst_cp:.1e} m, ray mismatches {ray_bad}, containment mismatches {contain_bad}"
        ),
    )
}

fn quick_params() -> Params {
    let mut p = common::quick_params();
    p.metrics = MetricParams {
        samples: 10_000,
        resolution: 256,
    };
    p
}

fn end_to_end_determinism() -> Outcome {
    let fx = make_fixture(&FixtureSpec::small()).unwrap();
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let options = FixtureOptions {
            params: quick_params(),
            seed: 21,
            masks: None,
        };
        let m = write_fixture(&fx, dir.path(), &options).unwrap();
        run_pipeline(&m, StageRange::all()).unwrap();
        let out = m.output_dir();
        let mut files = Vec::new();
        for k in 1..=fx.layers.len() {
            files.push(std::fs::read(out.join(artifacts::garment(k))).unwrap());
        }
        files.push(std::fs::read(out.join(artifacts::report())).unwrap());
        outputs.push(files);
    }
    let same = outputs[0] == outputs[1];
    let faces: usize = outputs[0][..fx.layers.len()].iter().map(|b| b.len()).sum();
    (
        same && faces > 0,
        format!("{} garments + report bit-identical: {same} (reduced training config)", fx.layers.len()),
    )
}

/// Ray-cast visibility of `p` in `cam`: the first surface hit through the
/// center of the pixel `p` projects to.
fn ray_visible_pixel(index: &SpatialIndex, cam: &Camera, p: &Point3) -> Option<(usize, usize)> {
    let pr = cam.project(p)?;
    if !(pr.x >= 0.0 && pr.y >= 0.0) {
        return None;
    }
    let (x, y) = (pr.x.floor() as usize, pr.y.floor() as usize);
    if x >= cam.width() || y >= cam.height() {
        return None;
    }
    let (o, d) = cam.ray(x as f64 + 0.5, y as f64 + 0.5);
    let hit = index.ray_intersections(&o, &d).unwrap().first().copied()?;
    let depth = cam.project(&(o + d * hit.t))?.depth;
    (pr.depth <= depth + VISIBILITY_TOLERANCE).then_some((x, y))
}

fn label_voting() -> Outcome {
    let fx = make_fixture(&FixtureSpec::small()).unwrap();
    let mesh = &fx.posed[1];
    let label = fx.layers[1].label;
    let truth = mesh.labels().unwrap();
    let index = SpatialIndex::new(mesh).unwrap();
    let b = mesh.bounds();
    let cams = sample_turntable_views(&b.center(), 1.5 * b.diagonal(), [192, 192]).unwrap();
    // Masks from ray casting: a pixel is garment when the face first hit
    // through its center has at least two garment vertices.
    let views: Vec<(Camera, LabelMask)> = cams
        .into_iter()
        .map(|cam| {
            let mut data = Vec::with_capacity(cam.width() * cam.height());
            for y in 0..cam.height() {
                for x in 0..cam.width() {
                    let (o, d) = cam.ray(x as f64 + 0.5, y as f64 + 0.5);
                    let hit = index.ray_intersections(&o, &d).unwrap().first().copied();
                    data.push(hit.is_some_and(|h| {
                        mesh.faces()[h.face].iter().filter(|&&v| truth[v] == label).count() >= 2
                    }));
                }
            }
            let mask = LabelMask::new(cam.width(), cam.height(), data).unwrap();
            (cam, mask)
        })
        .collect();
    let voted = vote_vertex_labels(mesh, &views, label).unwrap();

    let mut oracle = vec![0; mesh.vertex_count()];
    let mut visible = vec![false; mesh.vertex_count()];
    for (v, p) in mesh.vertices().iter().enumerate() {
        let (mut seen, mut hits) = (0, 0);
        for (cam, mask) in &views {
            if let Some((x, y)) = ray_visible_pixel(&index, cam, p) {
                seen += 1;
                hits += usize::from(mask.get(x, y));
            }
        }
        visible[v] = seen > 0;
        if seen > 0 && 2 * hits > seen {
            oracle[v] = label;
        }
    }
    let vis_count = visible.iter().filter(|&&b| b).count();
    let correct = (0..mesh.vertex_count())
        .filter(|&v| visible[v] && (voted[v] == label) == (truth[v] == label))
        .count();
    let accuracy = correct as f64 / vis_count as f64;
    let oracle_mismatch = voted.iter().zip(&oracle).filter(|(a, b)| a != b).count();
    (
        accuracy >= 0.99 && oracle_mismatch == 0,
        format!(
            "accuracy {:.2}% on {vis_count} visible vertices, {oracle_mismatch} disagreements with ray-cast oracle",
            100.0 * accuracy
        ),
    )
}

fn main() -> ExitCode {
    let stack = penetration_fixture();
    type Check<'a> = Box<dyn FnOnce() -> Outcome + 'a>;
    let criteria: Vec<(&str, Check)> = vec![
        ("1 skinning round trip", Box::new(skinning_round_trip)),
        ("2 penetration removal", Box::new(|| penetration_removal(&stack))),
        ("3 intersection ratio trend", Box::new(|| ir_trend(&stack))),
        ("4 UDF fitting", Box::new(udf_fitting)),
        ("5 gradient check", Box::new(gradient_check)),
        ("6 extraction", Box::new(extraction)),
        ("7 face orientation", Box::new(orientation)),
        ("8 metrics sanity", Box::new(metrics_sanity)),
        ("9 oracle equivalence", Box::new(oracle_equivalence)),
        ("10 end-to-end determinism", Box::new(end_to_end_determinism)),
        ("11 label voting", Box::new(label_voting)),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        failed += usize::from(!ok);
        println!(
            "{} criterion {name}: {detail} [{:.1} s]",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
