use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, SpatialIndex, TriMesh, Vec3};

/// How a training sample was drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleCategory {
    OnSurface,
    NearSurface,
    Box,
}

impl SampleCategory {
    fn name(self) -> &'static str {
        match self {
            SampleCategory::OnSurface => "on-surface",
            SampleCategory::NearSurface => "near-surface",
            SampleCategory::Box => "box",
        }
    }
}

/// Supervision points with ground-truth unsigned distances.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SampleSet {
    pub points: Vec<Point3>,
    pub gt: Vec<f64>,
    pub categories: Vec<SampleCategory>,
}

impl SampleSet {
    pub fn push(&mut self, point: Point3, gt: f64, category: SampleCategory) {
        self.points.push(point);
        self.gt.push(gt);
        self.categories.push(category);
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Per-category sample counts and the near-surface noise scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleCounts {
    pub on_surface: usize,
    pub near_surface: usize,
    #[serde(rename = "box")]
    pub in_box: usize,
    /// Standard deviation (meters, per axis) of the near-surface offset.
    pub sigma: f64,
}

impl Default for SampleCounts {
    fn default() -> Self {
        SampleCounts {
            on_surface: 200_000,
            near_surface: 200_000,
            in_box: 100_000,
            sigma: 0.01,
        }
    }
}

/// Rejected candidates allowed per requested sample before giving up.
const OVERSAMPLING_CAP: usize = 100;
/// Candidates drawn per round; rounds are evaluated in parallel.
const CHUNK: usize = 8192;

/// Draws the three sample categories for one garment.
///
/// On-surface points are area-uniform on faces whose three vertices are in
/// `garment_set`. Near-surface points add Gaussian noise to fresh on-surface
/// points; box points are uniform in the mesh bounds grown by 10% of the
/// extent on every side. Near-surface and box candidates whose closest point
/// on `mesh` lies on a face outside the garment are rejected and redrawn.
/// Ground truth is the distance to the garment sub-surface.
pub fn sample_training_points(
    mesh: &TriMesh,
    garment_set: &[usize],
    counts: &SampleCounts,
    seed: u64,
) -> Result<SampleSet> {
    if garment_set.is_empty() {
        return Err(Error::invalid("garment vertex set is empty"));
    }
    if !(counts.sigma >= 0.0) {
        return Err(Error::invalid("near-surface sigma must be non-negative"));
    }
    let mut in_set = vec![false; mesh.vertex_count()];
    for &v in garment_set {
        if v >= in_set.len() {
            return Err(Error::invalid(format!(
                "garment vertex {v} out of range ({} vertices)",
                in_set.len()
            )));
        }
        in_set[v] = true;
    }
    let garment_faces = mesh.faces_within(&in_set);
    if !garment_faces.iter().any(|&g| g) {
        return Err(Error::invalid("no face has all three vertices in the garment set"));
    }
    let (sub, _) = mesh.submesh(|f| garment_faces[f]);
    let full_index = SpatialIndex::new(mesh)?;
    let sub_index = SpatialIndex::new(&sub)?;
    let surface = AreaSampler::new(&sub);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = SampleSet::default();
    for _ in 0..counts.on_surface {
        set.push(surface.sample(&mut rng), 0.0, SampleCategory::OnSurface);
    }

    let normal = Normal::new(0.0, counts.sigma).map_err(|e| Error::invalid(e.to_string()))?;
    draw_filtered(
        &mut set,
        SampleCategory::NearSurface,
        counts.near_surface,
        &mut rng,
        |rng| {
            let p = surface.sample(rng);
            p + Vec3::new(normal.sample(rng), normal.sample(rng), normal.sample(rng))
        },
        &full_index,
        &garment_faces,
        &sub_index,
    )?;

    let bounds = mesh.bounds();
    let grow = bounds.extent() * 0.1;
    let lo = bounds.min - grow;
    let hi = bounds.max + grow;
    draw_filtered(
        &mut set,
        SampleCategory::Box,
        counts.in_box,
        &mut rng,
        |rng| {
            Point3::new(
                rng.random_range(lo.x..=hi.x),
                rng.random_range(lo.y..=hi.y),
                rng.random_range(lo.z..=hi.z),
            )
        },
        &full_index,
        &garment_faces,
        &sub_index,
    )?;
    Ok(set)
}

#[allow(clippy::too_many_arguments)]
fn draw_filtered(
    set: &mut SampleSet,
    category: SampleCategory,
    wanted: usize,
    rng: &mut ChaCha8Rng,
    mut candidate: impl FnMut(&mut ChaCha8Rng) -> Point3,
    full_index: &SpatialIndex,
    garment_faces: &[bool],
    sub_index: &SpatialIndex,
) -> Result<()> {
    let cap = wanted.saturating_mul(OVERSAMPLING_CAP);
    let mut accepted = 0;
    let mut attempts = 0;
    while accepted < wanted {
        if attempts >= cap {
            return Err(Error::SamplingStarvation {
                category: category.name(),
                wanted,
                accepted,
                attempts,
            });
        }
        let round = CHUNK.min(cap - attempts);
        let candidates: Vec<Point3> = (0..round).map(|_| candidate(rng)).collect();
        let verdicts: Vec<Option<f64>> = candidates
            .par_iter()
            .map(|p| {
                let hit = full_index.closest_point(p);
                garment_faces[hit.face].then(|| sub_index.unsigned_distance(p))
            })
            .collect();
        for (p, d) in candidates.into_iter().zip(verdicts) {
            attempts += 1;
            if let Some(d) = d {
                set.push(p, d, category);
                accepted += 1;
                if accepted == wanted {
                    break;
                }
            }
        }
    }
    Ok(())
}

/// Area-weighted random points on a mesh surface.
pub(crate) struct AreaSampler<'a> {
    mesh: &'a TriMesh,
    cumulative: Vec<f64>,
}

impl<'a> AreaSampler<'a> {
    pub(crate) fn new(mesh: &'a TriMesh) -> Self {
        let mut total = 0.0;
        let cumulative = (0..mesh.face_count())
            .map(|f| {
                total += mesh.face_area(f);
                total
            })
            .collect();
        AreaSampler { mesh, cumulative }
    }

    pub(crate) fn total_area(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Returns the point and the face it was drawn from.
    pub(crate) fn sample_with_face(&self, rng: &mut impl Rng) -> (Point3, usize) {
        let target = rng.random::<f64>() * self.total_area();
        let face = self
            .cumulative
            .partition_point(|&c| c <= target)
            .min(self.cumulative.len() - 1);
        let [a, b, c] = self.mesh.triangle(face);
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        let s = r1.sqrt();
        let p = a.coords * (1.0 - s) + b.coords * (s * (1.0 - r2)) + c.coords * (s * r2);
        (Point3::from(p), face)
    }

    pub(crate) fn sample(&self, rng: &mut impl Rng) -> Point3 {
        self.sample_with_face(rng).0
    }
}
