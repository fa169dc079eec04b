//! Deterministic synthetic fixtures: a capsule-chain body with smooth
//! skinning weights and garment layers offset from it along the surface
//! normal, optionally with seeded inward penetrations.
//!
//! Body and garments share one vertex layout (vertex `i` of every layer sits
//! on the normal through body vertex `i`), which makes ground truth cheap.

pub mod shapes;

use std::f64::consts::PI;

use nalgebra::{Matrix4, Translation3, Unit, UnitQuaternion, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, SpatialIndex, TriMesh, Vec3};
use crate::skinning::{Pose, SkinnedBody, WeightField};

/// One garment layer of a fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    /// Normal offset from the body inside the coverage interval, meters.
    pub offset: f64,
    /// Covered part of the body, as fractions of the bottom-to-top profile
    /// length.
    pub coverage: [f64; 2],
    /// Fraction of garment vertices pushed inside the next inner surface.
    #[serde(default)]
    pub penetration_fraction: f64,
}

/// Parameters of a synthetic body and its garment layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureSpec {
    pub joint_count: usize,
    pub limb_length: f64,
    pub radius: f64,
    /// Rings between the two poles.
    pub rings: usize,
    /// Vertices per ring.
    pub segments: usize,
    pub layers: Vec<LayerSpec>,
    /// Width (profile fraction) over which a garment blends back onto the
    /// body outside its coverage.
    pub ramp_width: f64,
    /// How far (meters) a penetrating vertex ends up inside the inner surface.
    pub penetration_depth: f64,
    /// Largest per-joint rotation of the generated layer poses, radians.
    pub pose_magnitude: f64,
    pub seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            joint_count: 4,
            limb_length: 0.25,
            radius: 0.12,
            rings: 160,
            segments: 128,
            layers: vec![
                LayerSpec {
                    offset: 0.010,
                    coverage: [0.05, 0.50],
                    penetration_fraction: 0.1,
                },
                LayerSpec {
                    offset: 0.020,
                    coverage: [0.30, 0.80],
                    penetration_fraction: 0.1,
                },
                LayerSpec {
                    offset: 0.030,
                    coverage: [0.25, 0.90],
                    penetration_fraction: 0.1,
                },
            ],
            ramp_width: 0.03,
            penetration_depth: 0.010,
            pose_magnitude: 0.3,
            seed: 0,
        }
    }
}

impl FixtureSpec {
    /// A coarse variant for quick tests.
    pub fn small() -> Self {
        FixtureSpec {
            rings: 40,
            segments: 32,
            ..FixtureSpec::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.joint_count == 0 {
            return Err(Error::invalid("fixture needs at least one joint"));
        }
        if !(self.limb_length > 0.0 && self.radius > 0.0) {
            return Err(Error::invalid("limb length and radius must be positive"));
        }
        if self.rings < 2 || self.segments < 3 {
            return Err(Error::invalid("need at least 2 rings and 3 segments"));
        }
        if !(self.ramp_width > 0.0) || !(self.penetration_depth > 0.0) {
            return Err(Error::invalid("ramp width and penetration depth must be positive"));
        }
        for (k, l) in self.layers.iter().enumerate() {
            if !(l.offset > 0.0) {
                return Err(Error::invalid(format!("layer {} offset must be positive", k + 1)));
            }
            let [a, b] = l.coverage;
            if !(0.0 <= a && a < b && b <= 1.0) {
                return Err(Error::invalid(format!("layer {} coverage {a}..{b} is not inside [0, 1]", k + 1)));
            }
            if !(0.0..=1.0).contains(&l.penetration_fraction) {
                return Err(Error::invalid(format!("layer {} penetration fraction out of [0, 1]", k + 1)));
            }
        }
        Ok(())
    }
}

/// A generated body together with the per-vertex data garments are built
/// from.
#[derive(Debug, Clone)]
pub struct SynthBody {
    pub body: SkinnedBody,
    pub rest_pose: Pose,
    /// Profile coordinate in `[0, 1]` of every vertex (0 = bottom pole).
    pub profile: Vec<f64>,
    /// Analytic outward unit normal of every vertex.
    pub normals: Vec<Vec3>,
    /// Pivot of every joint (bottom end of its bone).
    pub pivots: Vec<Point3>,
}

/// A garment layer in the rest pose.
#[derive(Debug, Clone)]
pub struct SynthLayer {
    /// Labeled mesh: `label` on garment vertices, 0 elsewhere.
    pub mesh: TriMesh,
    pub label: i32,
    pub garment_set: Vec<usize>,
    /// Per-vertex normal offset from the body before penetrations.
    pub offsets: Vec<f64>,
    /// Garment vertices pushed inside the inner surface.
    pub penetrating: Vec<usize>,
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Capsule chain along `+y`: `joint_count` bones of `limb_length` with
/// hemispherical caps. Weights blend smoothly between adjacent bone
/// midpoints.
pub fn make_body(spec: &FixtureSpec) -> Result<SynthBody> {
    spec.validate()?;
    let r = spec.radius;
    let j = spec.joint_count;
    let len = j as f64 * spec.limb_length;
    let cap = 0.5 * PI * r;
    let total = 2.0 * cap + len;
    let m = spec.segments;

    // (radius, height, normal in the (r, y) plane) for profile length s.
    let profile_at = |s: f64| -> (f64, f64, [f64; 2]) {
        if s < cap {
            let th = s / r;
            (r * th.sin(), -r * th.cos(), [th.sin(), -th.cos()])
        } else if s <= cap + len {
            (r, s - cap, [1.0, 0.0])
        } else {
            let th = (s - cap - len) / r;
            (r * th.cos(), len + r * th.sin(), [th.cos(), th.sin()])
        }
    };

    let mut vertices = vec![Point3::new(0.0, -r, 0.0)];
    let mut normals = vec![Vec3::new(0.0, -1.0, 0.0)];
    let mut profile = vec![0.0];
    for i in 1..=spec.rings {
        let s = total * i as f64 / (spec.rings + 1) as f64;
        let (rad, y, n) = profile_at(s);
        for k in 0..m {
            let phi = 2.0 * PI * k as f64 / m as f64;
            let (sin, cos) = phi.sin_cos();
            vertices.push(Point3::new(rad * sin, y, rad * cos));
            normals.push(Vec3::new(n[0] * sin, n[1], n[0] * cos));
            profile.push(s / total);
        }
    }
    vertices.push(Point3::new(0.0, len + r, 0.0));
    normals.push(Vec3::new(0.0, 1.0, 0.0));
    profile.push(1.0);

    let top = vertices.len() - 1;
    let ring = |i: usize, k: usize| 1 + i * m + (k % m);
    let mut faces = Vec::with_capacity(2 * m * spec.rings);
    for k in 0..m {
        faces.push([0, ring(0, k + 1), ring(0, k)]);
    }
    for i in 0..spec.rings - 1 {
        for k in 0..m {
            let (a, b) = (ring(i, k), ring(i, k + 1));
            let (c, d) = (ring(i + 1, k), ring(i + 1, k + 1));
            faces.push([a, b, d]);
            faces.push([a, d, c]);
        }
    }
    for k in 0..m {
        faces.push([top, ring(spec.rings - 1, k), ring(spec.rings - 1, k + 1)]);
    }
    let mut mesh = TriMesh::new(vertices, faces)?;
    if signed_volume(&mesh) < 0.0 {
        for f in 0..mesh.face_count() {
            mesh.flip_face(f);
        }
    }

    let mids: Vec<f64> = (0..j).map(|i| (i as f64 + 0.5) * spec.limb_length).collect();
    let mut data = Vec::with_capacity(mesh.vertex_count() * j);
    for p in mesh.vertices() {
        let mut row = vec![0.0; j];
        if p.y <= mids[0] {
            row[0] = 1.0;
        } else if p.y >= mids[j - 1] {
            row[j - 1] = 1.0;
        } else {
            let i = (((p.y - mids[0]) / spec.limb_length).floor() as usize).min(j - 2);
            let s = smoothstep((p.y - mids[i]) / spec.limb_length);
            row[i] = 1.0 - s;
            row[i + 1] = s;
        }
        data.extend_from_slice(&row);
    }
    let weights = WeightField::new(j, data)?;
    let pivots = (0..j)
        .map(|i| Point3::new(0.0, i as f64 * spec.limb_length, 0.0))
        .collect();
    Ok(SynthBody {
        body: SkinnedBody::new(mesh, weights)?,
        rest_pose: Pose::identity(j),
        profile,
        normals,
        pivots,
    })
}

pub(crate) fn signed_volume(mesh: &TriMesh) -> f64 {
    (0..mesh.face_count())
        .map(|f| {
            let [a, b, c] = mesh.triangle(f);
            a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
        })
        .sum()
}

/// Normal offset profile of a layer: full `offset` inside the coverage,
/// blending to zero over `ramp_width` outside it.
fn coverage_weight(u: f64, coverage: [f64; 2], ramp: f64) -> f64 {
    let dist = if u < coverage[0] {
        coverage[0] - u
    } else if u > coverage[1] {
        u - coverage[1]
    } else {
        0.0
    };
    1.0 - smoothstep(dist / ramp)
}

/// Builds one garment layer over `body`.
///
/// Garment vertices are those inside the coverage interval. When `inner`
/// is given (the next inner surface, with its per-vertex offsets), exactly
/// `round(fraction * |S|)` garment vertices are moved `depth` below that
/// surface, each one re-checked by a winding-number test against `inner`.
pub fn make_garment_layer(
    body: &SynthBody,
    layer: &LayerSpec,
    label: i32,
    spec: &FixtureSpec,
    inner: Option<(&TriMesh, &[f64])>,
    seed: u64,
) -> Result<SynthLayer> {
    if !(layer.offset > 0.0) {
        return Err(Error::invalid("garment offset must be positive"));
    }
    let base = body.body.mesh.vertices();
    let offsets: Vec<f64> = body
        .profile
        .iter()
        .map(|&u| layer.offset * coverage_weight(u, layer.coverage, spec.ramp_width))
        .collect();
    let garment_set: Vec<usize> = (0..base.len())
        .filter(|&i| (layer.coverage[0]..=layer.coverage[1]).contains(&body.profile[i]))
        .collect();
    let mut vertices: Vec<Point3> = base
        .iter()
        .zip(&body.normals)
        .zip(&offsets)
        .map(|((p, n), &o)| p + n * o)
        .collect();

    let wanted = (layer.penetration_fraction * garment_set.len() as f64).round() as usize;
    let mut penetrating = Vec::with_capacity(wanted);
    if wanted > 0 {
        let (inner_mesh, inner_offsets) = match inner {
            Some((m, o)) => (m.clone(), o.to_vec()),
            None => (body.body.mesh.clone(), vec![0.0; base.len()]),
        };
        let index = SpatialIndex::new(&inner_mesh)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut candidates = garment_set.clone();
        candidates.shuffle(&mut rng);
        for v in candidates {
            if penetrating.len() == wanted {
                break;
            }
            let target = base[v] + body.normals[v] * (inner_offsets[v] - spec.penetration_depth);
            if index.contains_point(&target) {
                vertices[v] = target;
                penetrating.push(v);
            }
        }
        if penetrating.len() < wanted {
            return Err(Error::invalid(format!(
                "only {} of {wanted} requested penetrations fit inside the inner surface",
                penetrating.len()
            )));
        }
        penetrating.sort_unstable();
    }

    let mut labels = vec![0; base.len()];
    for &v in &garment_set {
        labels[v] = label;
    }
    let mesh = TriMesh::new(vertices, body.body.mesh.faces().to_vec())?.with_labels(labels)?;
    Ok(SynthLayer {
        mesh,
        label,
        garment_set,
        offsets,
        penetrating,
    })
}

/// Random pose: each joint rotates about its pivot by an angle up to
/// `magnitude` around a random axis, then the whole body shifts by up to
/// `0.05 * magnitude` meters.
pub fn perturb_pose(pivots: &[Point3], magnitude: f64, seed: u64) -> Result<Pose> {
    if !(magnitude >= 0.0) {
        return Err(Error::invalid("pose magnitude must be non-negative"));
    }
    if pivots.is_empty() {
        return Err(Error::invalid("pose needs at least one joint"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = random_unit(&mut rng) * (0.05 * magnitude * rng.random::<f64>());
    let global = Translation3::from(shift).to_homogeneous();
    let bones = pivots
        .iter()
        .map(|c| {
            let axis = Unit::new_normalize(random_unit(&mut rng));
            let angle = magnitude * rng.random::<f64>();
            let rot = UnitQuaternion::from_axis_angle(&axis, angle).to_homogeneous();
            let to = Translation3::from(c.coords).to_homogeneous();
            let from = Translation3::from(-c.coords).to_homogeneous();
            global * to * rot * from
        })
        .collect::<Vec<Matrix4<f64>>>();
    Pose::new(bones)
}

fn random_unit(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Everything a pipeline run needs, in memory.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub spec: FixtureSpec,
    pub body: SynthBody,
    /// Rest-pose layers, inner to outer.
    pub layers: Vec<SynthLayer>,
    /// Per-layer capture pose.
    pub poses: Vec<Pose>,
    /// Layers deformed by their capture pose (what a reconstruction would
    /// deliver), labels included.
    pub posed: Vec<TriMesh>,
}

/// Builds body, layers (each penetrating the previous one as requested) and
/// per-layer posed copies. Layer `k` uses label `k` (1-based).
pub fn make_fixture(spec: &FixtureSpec) -> Result<Fixture> {
    let body = make_body(spec)?;
    let mut layers: Vec<SynthLayer> = Vec::with_capacity(spec.layers.len());
    for (k, ls) in spec.layers.iter().enumerate() {
        let inner = layers.last().map(|l| (&l.mesh, l.offsets.as_slice()));
        let seed = spec.seed.wrapping_mul(1000).wrapping_add(k as u64 + 1);
        let layer = make_garment_layer(&body, ls, k as i32 + 1, spec, inner, seed)?;
        layers.push(layer);
    }
    let mut poses = Vec::with_capacity(layers.len());
    let mut posed = Vec::with_capacity(layers.len());
    for (k, layer) in layers.iter().enumerate() {
        let seed = spec.seed.wrapping_mul(1000).wrapping_add(500 + k as u64);
        let pose = perturb_pose(&body.pivots, spec.pose_magnitude, seed)?;
        let moved = crate::skinning::lbs_forward(layer.mesh.vertices(), &body.body.weights, &pose)?;
        let mut mesh = layer.mesh.clone();
        mesh.vertices_mut().copy_from_slice(&moved);
        poses.push(pose);
        posed.push(mesh);
    }
    Ok(Fixture {
        spec: spec.clone(),
        body,
        layers,
        poses,
        posed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::winding_number_exact;

    #[test]
    fn single_joint_body_is_closed_with_unit_weights() {
        let spec = FixtureSpec {
            joint_count: 1,
            layers: vec![],
            ..FixtureSpec::small()
        };
        let b = make_body(&spec).unwrap();
        assert!((0..b.body.mesh.vertex_count()).all(|v| b.body.weights.row(v) == [1.0]));
        let w_in = winding_number_exact(&b.body.mesh, &Point3::new(0.0, 0.125, 0.0));
        let w_out = winding_number_exact(&b.body.mesh, &Point3::new(5.0, 0.0, 0.0));
        assert!((w_in - 1.0).abs() < 1e-6 && w_out.abs() < 1e-6);
        assert!(signed_volume(&b.body.mesh) > 0.0);
    }

    #[test]
    fn weights_sum_to_one_and_blend_smoothly() {
        let b = make_body(&FixtureSpec::small()).unwrap();
        let w = &b.body.weights;
        for v in 0..w.len() {
            assert!((w.row(v).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // Some vertex is shared between two bones.
        assert!((0..w.len()).any(|v| w.row(v).iter().filter(|&&x| x > 0.0 && x < 1.0).count() == 2));
    }

    #[test]
    fn unpenetrated_garment_vertices_are_outside_the_body() {
        let spec = FixtureSpec {
            layers: vec![LayerSpec {
                offset: 0.01,
                coverage: [0.2, 0.6],
                penetration_fraction: 0.0,
            }],
            ..FixtureSpec::small()
        };
        let b = make_body(&spec).unwrap();
        let g = make_garment_layer(&b, &spec.layers[0], 1, &spec, None, 0).unwrap();
        let index = SpatialIndex::new(&b.body.mesh).unwrap();
        assert!(!g.garment_set.is_empty());
        assert!(g.garment_set.iter().all(|&v| !index.contains_point(&g.mesh.vertices()[v])));
        assert_eq!(g.mesh.labels().unwrap().iter().filter(|&&l| l == 1).count(), g.garment_set.len());
    }

    #[test]
    fn zero_magnitude_pose_is_identity() {
        let b = make_body(&FixtureSpec::small()).unwrap();
        let p = perturb_pose(&b.pivots, 0.0, 3).unwrap();
        assert_eq!(p, Pose::identity(4));
        let a = perturb_pose(&b.pivots, 0.5, 3).unwrap();
        assert_eq!(a, perturb_pose(&b.pivots, 0.5, 3).unwrap());
        assert_ne!(a, perturb_pose(&b.pivots, 0.5, 4).unwrap());
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = FixtureSpec::small();
        s.layers[0].coverage = [0.6, 0.2];
        assert!(make_body(&s).is_err());
        let mut s = FixtureSpec::small();
        s.layers[1].offset = 0.0;
        assert!(s.validate().is_err());
    }
}
