//! Moving garment layers into a shared canonical pose and untangling them
//! from the inside out.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{face_normals, Point3, SpatialIndex, TriMesh, Vec3};
use crate::skinning::{lbs_forward, lbs_inverse, transfer_weights_from, Pose, SkinnedBody};

/// Default garment thickness, meters.
pub const DEFAULT_EPSILON: f64 = 0.002;

/// Barycentric slack of the displacement-line queries.
const LINE_SLACK: f64 = 1e-9;
/// Upper bound on outward steps when the displacement line misses the
/// previous layer.
const MAX_MARCH_STEPS: usize = 10_000;
const WATERTIGHT_PROBES: usize = 32;

/// One garment layer in the canonical pose with its garment vertices.
#[derive(Debug, Clone)]
pub struct StackLayer {
    pub mesh: TriMesh,
    pub garment_set: Vec<usize>,
}

/// Canonical body plus garment layers ordered inner to outer.
#[derive(Debug, Clone)]
pub struct LayerStack {
    pub body: SkinnedBody,
    pub layers: Vec<StackLayer>,
    /// Thickness kept between a pushed-out vertex and the surface below it.
    pub epsilon: f64,
}

impl LayerStack {
    pub fn new(body: SkinnedBody, layers: Vec<StackLayer>, epsilon: f64) -> Result<Self> {
        let stack = LayerStack { body, layers, epsilon };
        stack.validate()?;
        Ok(stack)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(format!("thickness must be positive, got {}", self.epsilon)));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            let n = layer.mesh.vertex_count();
            if let Some(&v) = layer.garment_set.iter().find(|&&v| v >= n) {
                return Err(Error::invalid(format!(
                    "layer {}: garment vertex {v} out of range for {n} vertices",
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

/// Brings a layer captured in `pose` back to the body's rest pose.
///
/// Every layer vertex takes the weights of its nearest vertex on the posed
/// body; the blended transforms are then inverted per vertex.
pub fn canonicalize_layer(mesh: &TriMesh, body: &SkinnedBody, pose: &Pose) -> Result<TriMesh> {
    canonicalize_layer_to(mesh, body, pose, None)
}

/// [`canonicalize_layer`] followed, when `canonical` is given, by forward
/// skinning into that pose with the same transferred weights.
pub fn canonicalize_layer_to(
    mesh: &TriMesh,
    body: &SkinnedBody,
    pose: &Pose,
    canonical: Option<&Pose>,
) -> Result<TriMesh> {
    let posed_body = body.posed(pose)?;
    let weights = transfer_weights_from(posed_body.vertices(), &body.weights, mesh.vertices())?;
    let mut rest = lbs_inverse(mesh.vertices(), &weights, pose)?;
    if let Some(c) = canonical {
        rest = lbs_forward(&rest, &weights, c)?;
    }
    let mut out = mesh.clone();
    out.vertices_mut().copy_from_slice(&rest);
    Ok(out)
}

/// How the vertices of one layer were treated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LayerPassStats {
    /// Non-garment vertices placed on the previous layer.
    pub snapped: usize,
    /// Garment vertices found inside the previous layer and pushed out.
    pub pushed: usize,
    /// Garment vertices already outside, left untouched.
    pub kept: usize,
    /// Vertices whose displacement line missed the previous layer.
    pub line_misses: usize,
    /// Whether the previous layer failed the closed-surface probe.
    pub open_previous: bool,
}

/// Resolves interpenetrations layer by layer, inner to outer.
///
/// For layer `k` the previous surface is the already processed layer
/// `k - 1` (the body for the first one). Each vertex `v` is moved only along
/// the line through its closest body point `b` in the direction of that body
/// face's normal `n`, and `t*` is the outermost crossing of that line with
/// the previous surface:
/// - non-garment vertices go to `b + t* n`;
/// - garment vertices inside the previous surface go to `b + (t* + epsilon) n`;
/// - garment vertices outside it stay exactly where they are.
pub fn remove_penetrations(stack: &LayerStack) -> Result<Vec<TriMesh>> {
    Ok(remove_penetrations_with_stats(stack)?.into_iter().map(|(m, _)| m).collect())
}

/// [`remove_penetrations`] that also reports what happened to every layer.
pub fn remove_penetrations_with_stats(stack: &LayerStack) -> Result<Vec<(TriMesh, LayerPassStats)>> {
    stack.validate()?;
    let body = SpatialIndex::new(&stack.body.mesh)?;
    let body_normals = face_normals(&stack.body.mesh)?;
    let mut previous = body.clone();
    let mut out = Vec::with_capacity(stack.layers.len());
    for (k, layer) in stack.layers.iter().enumerate() {
        let open_previous = !looks_closed(&previous);
        if open_previous {
            log::warn!(
                "surface below layer {} does not look closed; containment tests may be unreliable",
                k + 1
            );
        }
        let mut in_set = vec![false; layer.mesh.vertex_count()];
        for &v in &layer.garment_set {
            in_set[v] = true;
        }
        let ctx = Displace {
            body: &body,
            body_normals: &body_normals,
            previous: &previous,
            epsilon: stack.epsilon,
        };
        let moved: Vec<(Point3, Case)> = layer
            .mesh
            .vertices()
            .par_iter()
            .zip(in_set.par_iter())
            .map(|(v, &garment)| ctx.apply(v, garment))
            .collect();
        let mut stats = LayerPassStats {
            open_previous,
            ..Default::default()
        };
        let mut mesh = layer.mesh.clone();
        for (slot, (p, case)) in mesh.vertices_mut().iter_mut().zip(moved) {
            *slot = p;
            match case {
                Case::Snapped { missed } => {
                    stats.snapped += 1;
                    stats.line_misses += usize::from(missed);
                }
                Case::Pushed { missed } => {
                    stats.pushed += 1;
                    stats.line_misses += usize::from(missed);
                }
                Case::Kept => stats.kept += 1,
            }
        }
        previous = SpatialIndex::new(&mesh)?;
        out.push((mesh, stats));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy)]
enum Case {
    Snapped { missed: bool },
    Pushed { missed: bool },
    Kept,
}

struct Displace<'a> {
    body: &'a SpatialIndex,
    body_normals: &'a [Vec3],
    previous: &'a SpatialIndex,
    epsilon: f64,
}

impl Displace<'_> {
    fn apply(&self, v: &Point3, garment: bool) -> (Point3, Case) {
        if garment && !self.previous.contains_point(v) {
            return (*v, Case::Kept);
        }
        let hit = self.body.closest_point(v);
        let (b, n) = (hit.point, self.body_normals[hit.face]);
        let t_star = self.previous.line_intersections(&b, &n, LINE_SLACK).last().map(|h| h.t);
        match (garment, t_star) {
            (false, Some(t)) => (b + n * t, Case::Snapped { missed: false }),
            (false, None) => (self.previous.closest_point(v).point, Case::Snapped { missed: true }),
            (true, Some(t)) => (b + n * (t + self.epsilon), Case::Pushed { missed: false }),
            (true, None) => {
                // Step outward from the body until the previous surface no
                // longer contains the point.
                let mut p = b + n * self.epsilon;
                for _ in 0..MAX_MARCH_STEPS {
                    if !self.previous.contains_point(&p) {
                        break;
                    }
                    p += n * self.epsilon;
                }
                (p, Case::Pushed { missed: true })
            }
        }
    }
}

/// A closed surface has an integer winding number of 0 or 1 away from it.
/// Probes are seeded points in the inflated bounding box that are not too
/// close to the surface.
fn looks_closed(index: &SpatialIndex) -> bool {
    let bounds = index.bounds();
    let diag = bounds.diagonal().max(1e-9);
    let grown = bounds.inflated(0.1 * diag);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut checked = 0;
    for _ in 0..WATERTIGHT_PROBES * 8 {
        if checked == WATERTIGHT_PROBES {
            break;
        }
        let p = Point3::new(
            rng.random_range(grown.min.x..=grown.max.x),
            rng.random_range(grown.min.y..=grown.max.y),
            rng.random_range(grown.min.z..=grown.max.z),
        );
        if index.unsigned_distance(&p) < 0.01 * diag {
            continue;
        }
        checked += 1;
        let w = index.winding_number(&p);
        if (w - w.round()).abs() > 0.1 || !(w.round() == 0.0 || w.round() == 1.0) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skinning::WeightField;
    use crate::synthgen::shapes::icosphere;

    fn sphere_body(r: f64) -> SkinnedBody {
        let mesh = icosphere(r, 3);
        let n = mesh.vertex_count();
        SkinnedBody::new(mesh, WeightField::single_joint(n, 1, 0).unwrap()).unwrap()
    }

    #[test]
    fn identity_pose_keeps_mesh() {
        let body = sphere_body(0.2);
        let layer = icosphere(0.25, 2);
        let out = canonicalize_layer(&layer, &body, &Pose::identity(1)).unwrap();
        assert_eq!(out, layer);
    }

    #[test]
    fn outside_garment_is_untouched() {
        let body = sphere_body(0.2);
        let layer = icosphere(0.25, 2);
        let all: Vec<usize> = (0..layer.vertex_count()).collect();
        let stack = LayerStack::new(body, vec![StackLayer { mesh: layer.clone(), garment_set: all }], 0.002).unwrap();
        let (out, stats) = remove_penetrations_with_stats(&stack).unwrap().remove(0);
        assert_eq!(out, layer);
        assert_eq!(stats.kept, layer.vertex_count());
    }

    #[test]
    fn open_previous_layer_is_flagged() {
        let body = sphere_body(0.2);
        let (cap, _) = icosphere(0.3, 2).submesh(|f| f % 2 == 0);
        let outer = icosphere(0.35, 2);
        let stack = LayerStack::new(
            body,
            vec![
                StackLayer { mesh: cap, garment_set: vec![] },
                StackLayer { mesh: outer, garment_set: vec![] },
            ],
            0.002,
        )
        .unwrap();
        let stats: Vec<_> = remove_penetrations_with_stats(&stack).unwrap().into_iter().map(|x| x.1).collect();
        assert!(!stats[0].open_previous);
        assert!(stats[1].open_previous);
    }

    #[test]
    fn bad_stacks_are_rejected() {
        let body = sphere_body(0.2);
        let layer = StackLayer {
            mesh: icosphere(0.25, 1),
            garment_set: vec![10_000],
        };
        assert!(LayerStack::new(body.clone(), vec![layer], 0.002).is_err());
        assert!(LayerStack::new(body, vec![], 0.0).is_err());
    }
}
