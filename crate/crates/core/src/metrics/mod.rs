//! Reconstruction quality: Chamfer distance, normal consistency and the
//! rendered intersection ratio.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{face_normal, Aabb, Point3, SpatialIndex, TriMesh, Vec3};
use crate::rasterview::{render_buffers, Camera, Projection};
use crate::udfnet::AreaSampler;

/// Default surface samples per side for Chamfer distance and normal
/// consistency.
pub const DEFAULT_METRIC_SAMPLES: usize = 100_000;
/// Default side length (pixels) of the intersection-ratio renders.
pub const DEFAULT_IR_RESOLUTION: u32 = 1024;
/// Fraction of the scene size left free around it in the IR renders.
const IR_MARGIN: f64 = 0.05;

/// Per-layer metrics. Geometry scores are present only when a reference
/// mesh was supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerMetrics {
    pub layer: usize,
    pub chamfer_mm: Option<f64>,
    pub normal_consistency: Option<f64>,
    pub intersection_ratio_percent: Option<f64>,
}

/// Aggregate metrics of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Means over the layers that have the respective score.
    pub chamfer_mm: Option<f64>,
    pub normal_consistency: Option<f64>,
    pub intersection_ratio_percent: Option<f64>,
    pub layers: Vec<LayerMetrics>,
    pub samples: usize,
    pub resolution: u32,
    pub seed: u64,
}

impl MetricReport {
    /// Fills the aggregate fields from `layers`.
    pub fn from_layers(layers: Vec<LayerMetrics>, samples: usize, resolution: u32, seed: u64) -> Self {
        fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
            let v: Vec<f64> = values.collect();
            (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
        }
        MetricReport {
            chamfer_mm: mean(layers.iter().filter_map(|l| l.chamfer_mm)),
            normal_consistency: mean(layers.iter().filter_map(|l| l.normal_consistency)),
            intersection_ratio_percent: mean(layers.iter().filter_map(|l| l.intersection_ratio_percent)),
            layers,
            samples,
            resolution,
            seed,
        }
    }

    pub fn save_json(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Area-uniform samples with the face each one lies on. The stream depends
/// only on `seed`, never on which side of a comparison the mesh is.
fn surface_samples(mesh: &TriMesh, n: usize, seed: u64) -> Result<Vec<(Point3, usize)>> {
    let sampler = AreaSampler::new(mesh);
    if !(sampler.total_area() > 0.0) {
        return Err(Error::invalid("cannot sample a mesh without surface area"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| sampler.sample_with_face(&mut rng)).collect())
}

fn check_inputs(a: &TriMesh, b: &TriMesh, n: usize) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("metrics need two meshes with faces"));
    }
    if n == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    Ok(())
}

/// Per-sample values summed in sample order, so the mean does not depend on
/// the thread count.
fn one_sided<F>(from: &TriMesh, to: &TriMesh, n: usize, seed: u64, value: F) -> Result<f64>
where
    F: Fn(&(Point3, usize), &SpatialIndex) -> f64 + Sync,
{
    let samples = surface_samples(from, n, seed)?;
    let index = SpatialIndex::new(to)?;
    let values: Vec<f64> = samples.par_iter().map(|s| value(s, &index)).collect();
    Ok(values.iter().sum::<f64>() / n as f64)
}

/// Symmetric Chamfer distance in millimeters: the average of the two mean
/// sample-to-surface distances, `n` samples per side.
pub fn chamfer_distance(a: &TriMesh, b: &TriMesh, n: usize, seed: u64) -> Result<f64> {
    check_inputs(a, b, n)?;
    let dist = |s: &(Point3, usize), index: &SpatialIndex| index.unsigned_distance(&s.0);
    let ab = one_sided(a, b, n, seed, dist)?;
    let ba = one_sided(b, a, n, seed, dist)?;
    Ok(500.0 * (ab + ba))
}

/// Symmetric mean of `|cos|` between each sample's face normal and the
/// normal of the closest face on the other mesh; in `[0, 1]`. The absolute
/// value makes the score blind to winding, as double-sided shells face both
/// ways.
pub fn normal_consistency(a: &TriMesh, b: &TriMesh, n: usize, seed: u64) -> Result<f64> {
    check_inputs(a, b, n)?;
    let ab = one_sided(a, b, n, seed, |s, index| normal_agreement(a, s, index))?;
    let ba = one_sided(b, a, n, seed, |s, index| normal_agreement(b, s, index))?;
    Ok(0.5 * (ab + ba))
}

fn normal_agreement(from: &TriMesh, sample: &(Point3, usize), index: &SpatialIndex) -> f64 {
    let hit = index.closest_point(&sample.0);
    match (face_normal(from, sample.1), face_normal(index.mesh(), hit.face)) {
        (Ok(na), Ok(nb)) if na == nb => 1.0,
        (Ok(na), Ok(nb)) => na.dot(&nb).abs().min(1.0),
        // A degenerate closest face carries no direction.
        _ => 0.0,
    }
}

/// Front (looking down `-z`) and back (looking down `+z`) orthographic
/// cameras framing `bounds` with a 5% margin.
pub fn front_back_cameras(bounds: &Aabb, resolution: u32) -> Result<[Camera; 2]> {
    if bounds.is_empty() {
        return Err(Error::invalid("cannot frame an empty scene"));
    }
    let ext = bounds.extent();
    let size = ext.x.max(ext.y);
    if !(size > 0.0 && size.is_finite()) {
        return Err(Error::invalid("scene has no extent across the view"));
    }
    let extent = size * (1.0 + 2.0 * IR_MARGIN);
    let c = bounds.center();
    let standoff = 0.5 * ext.z + IR_MARGIN * size + 1.0;
    let projection = Projection::Orthographic { extent };
    let up = Vec3::y();
    let front = Camera::look_at(projection, &(c + Vec3::z() * standoff), &c, &up, [resolution; 2])?;
    let back = Camera::look_at(projection, &(c - Vec3::z() * standoff), &c, &up, [resolution; 2])?;
    Ok([front, back])
}

/// Percentage of the outer garment's rendered area that inner surfaces
/// cover, over the front and back views framing the whole scene.
pub fn intersection_ratio(outer: &TriMesh, inner: &[&TriMesh], resolution: u32) -> Result<f64> {
    let mut bounds = outer.bounds();
    for m in inner {
        bounds = bounds.union(&m.bounds());
    }
    let views = front_back_cameras(&bounds, resolution)?;
    intersection_ratio_in_views(outer, inner, &views)
}

/// [`intersection_ratio`] with explicit cameras. `A` counts pixels where the
/// outer mesh is drawn when rendered alone, `Â` pixels where it stays the
/// nearest surface among all meshes; the ratio is `100 (A - Â) / A`.
pub fn intersection_ratio_in_views(outer: &TriMesh, inner: &[&TriMesh], views: &[Camera]) -> Result<f64> {
    let mut scene = vec![outer];
    scene.extend_from_slice(inner);
    let counts: Vec<(usize, usize)> = views
        .par_iter()
        .map(|cam| {
            let alone = render_buffers(&[outer], cam).covered_pixels();
            let together = render_buffers(&scene, cam);
            let visible = together.mesh_id.iter().filter(|&&m| m == 0).count();
            (alone, visible)
        })
        .collect();
    let a: usize = counts.iter().map(|c| c.0).sum();
    let a_hat: usize = counts.iter().map(|c| c.1).sum();
    if a == 0 {
        return Err(Error::UndefinedMetric("the outer garment covers no pixel in any view".into()));
    }
    Ok(100.0 * (a as f64 - a_hat as f64) / a as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::shapes::grid_patch;

    #[test]
    fn report_means_skip_missing_scores() {
        let layers = vec![
            LayerMetrics {
                layer: 1,
                chamfer_mm: Some(2.0),
                normal_consistency: None,
                intersection_ratio_percent: Some(1.0),
            },
            LayerMetrics {
                layer: 2,
                chamfer_mm: Some(4.0),
                normal_consistency: None,
                intersection_ratio_percent: Some(0.0),
            },
        ];
        let r = MetricReport::from_layers(layers, 10, 64, 7);
        assert_eq!(r.chamfer_mm, Some(3.0));
        assert_eq!(r.normal_consistency, None);
        assert_eq!(r.intersection_ratio_percent, Some(0.5));
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let empty = TriMesh::new(vec![], vec![]).unwrap();
        let p = grid_patch(1.0, 2);
        assert!(chamfer_distance(&empty, &p, 10, 0).is_err());
        assert!(normal_consistency(&p, &p, 0, 0).is_err());
    }
}
