//! Linear blend skinning: forward posing, per-vertex inverse posing, and
//! nearest-vertex weight transfer from a skinned body to other meshes.

mod io;

pub use io::{load_pose, load_weights, save_pose, save_weights};

use nalgebra::{Matrix3, Matrix4, Vector4};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointIndex, TriMesh};

/// Default joint count of a full human skeleton.
pub const DEFAULT_JOINT_COUNT: usize = 21;
/// Blended matrices with a larger condition number are refused by
/// [`lbs_inverse`].
pub const MAX_BLEND_CONDITION: f64 = 1e8;

const ROW_SUM_TOL: f64 = 1e-6;
const ROTATION_TOL: f64 = 1e-6;

/// Per-vertex skinning weights, one row of `joint_count` entries per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightField {
    joint_count: usize,
    data: Vec<f64>,
}

impl WeightField {
    /// `data` is row-major; every row must be non-negative and sum to 1.
    pub fn new(joint_count: usize, data: Vec<f64>) -> Result<Self> {
        if joint_count == 0 {
            return Err(Error::invalid("weight field needs at least one joint"));
        }
        if !data.len().is_multiple_of(joint_count) {
            return Err(Error::invalid(format!(
                "{} weights do not form rows of {joint_count}",
                data.len()
            )));
        }
        for (i, row) in data.chunks_exact(joint_count).enumerate() {
            if let Some(w) = row.iter().find(|w| !(**w >= 0.0)) {
                return Err(Error::invalid(format!("vertex {i} has weight {w}")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::invalid(format!("vertex {i} weights sum to {sum}")));
            }
        }
        Ok(WeightField { joint_count, data })
    }

    /// Every vertex fully bound to one joint.
    pub fn single_joint(vertex_count: usize, joint_count: usize, joint: usize) -> Result<Self> {
        if joint >= joint_count {
            return Err(Error::invalid(format!("joint {joint} out of {joint_count}")));
        }
        let mut data = vec![0.0; vertex_count * joint_count];
        for row in data.chunks_exact_mut(joint_count) {
            row[joint] = 1.0;
        }
        WeightField::new(joint_count, data)
    }

    pub fn joint_count(&self) -> usize {
        self.joint_count
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.joint_count
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, vertex: usize) -> &[f64] {
        &self.data[vertex * self.joint_count..(vertex + 1) * self.joint_count]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows for the given vertex indices, in order.
    pub fn select(&self, vertices: &[usize]) -> WeightField {
        let mut data = Vec::with_capacity(vertices.len() * self.joint_count);
        for &v in vertices {
            data.extend_from_slice(self.row(v));
        }
        WeightField {
            joint_count: self.joint_count,
            data,
        }
    }
}

/// Rigid per-joint bone transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    transforms: Vec<Matrix4<f64>>,
}

impl Pose {
    /// Checks that each matrix is rigid: orthonormal rotation block with
    /// determinant +1 and a `[0 0 0 1]` bottom row.
    pub fn new(transforms: Vec<Matrix4<f64>>) -> Result<Self> {
        if transforms.is_empty() {
            return Err(Error::invalid("pose needs at least one joint"));
        }
        for (i, m) in transforms.iter().enumerate() {
            check_rigid(m).map_err(|msg| Error::invalid(format!("bone {i}: {msg}")))?;
        }
        Ok(Pose { transforms })
    }

    pub fn identity(joint_count: usize) -> Self {
        Pose {
            transforms: vec![Matrix4::identity(); joint_count],
        }
    }

    pub fn joint_count(&self) -> usize {
        self.transforms.len()
    }

    pub fn transforms(&self) -> &[Matrix4<f64>] {
        &self.transforms
    }

    /// Left-multiplies every bone by the same rigid transform.
    pub fn premultiplied(&self, m: &Matrix4<f64>) -> Result<Pose> {
        Pose::new(self.transforms.iter().map(|b| m * b).collect())
    }

    /// `sum_i w_i B_i`.
    pub fn blend(&self, weights: &[f64]) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        for (w, b) in weights.iter().zip(&self.transforms) {
            if *w != 0.0 {
                m += b * *w;
            }
        }
        m
    }
}

fn check_rigid(m: &Matrix4<f64>) -> std::result::Result<(), String> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err("non-finite entry".into());
    }
    let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
    let err = (r.transpose() * r - Matrix3::identity()).abs().max();
    if err > ROTATION_TOL {
        return Err(format!("rotation block not orthonormal (error {err:.2e})"));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > ROTATION_TOL {
        return Err(format!("rotation determinant is {det}"));
    }
    let bottom = m.fixed_view::<1, 4>(3, 0);
    if (bottom - nalgebra::RowVector4::new(0.0, 0.0, 0.0, 1.0)).abs().max() > ROTATION_TOL {
        return Err("bottom row is not [0 0 0 1]".into());
    }
    Ok(())
}

/// Canonical body geometry with its skinning weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SkinnedBody {
    pub mesh: TriMesh,
    pub weights: WeightField,
}

impl SkinnedBody {
    pub fn new(mesh: TriMesh, weights: WeightField) -> Result<Self> {
        if weights.len() != mesh.vertex_count() {
            return Err(Error::invalid(format!(
                "{} weight rows for {} body vertices",
                weights.len(),
                mesh.vertex_count()
            )));
        }
        Ok(SkinnedBody { mesh, weights })
    }

    pub fn joint_count(&self) -> usize {
        self.weights.joint_count()
    }

    /// The body mesh deformed by `pose`.
    pub fn posed(&self, pose: &Pose) -> Result<TriMesh> {
        let mut mesh = self.mesh.clone();
        let moved = lbs_forward(mesh.vertices(), &self.weights, pose)?;
        mesh.vertices_mut().copy_from_slice(&moved);
        Ok(mesh)
    }

    /// Weight-averaged vertex position of every joint in the rest pose.
    /// Joints with no weight fall back to the mesh centroid.
    pub fn joint_centers(&self) -> Vec<Point3> {
        let j = self.joint_count();
        let mut sums = vec![nalgebra::Vector3::zeros(); j];
        let mut mass = vec![0.0; j];
        let mut centroid = nalgebra::Vector3::zeros();
        for (v, p) in self.mesh.vertices().iter().enumerate() {
            centroid += p.coords;
            for (k, &w) in self.weights.row(v).iter().enumerate() {
                sums[k] += p.coords * w;
                mass[k] += w;
            }
        }
        centroid /= self.mesh.vertex_count().max(1) as f64;
        sums.iter()
            .zip(&mass)
            .map(|(s, &m)| Point3::from(if m > 0.0 { s / m } else { centroid }))
            .collect()
    }
}

/// Copies to every mesh vertex the weight row of its nearest body vertex
/// (lowest body index on ties).
pub fn transfer_weights(body: &SkinnedBody, mesh: &TriMesh) -> Result<WeightField> {
    transfer_weights_from(body.mesh.vertices(), &body.weights, mesh.vertices())
}

/// [`transfer_weights`] with explicit source positions, e.g. a posed body.
pub fn transfer_weights_from(
    source: &[Point3],
    weights: &WeightField,
    targets: &[Point3],
) -> Result<WeightField> {
    if source.is_empty() {
        return Err(Error::invalid("cannot transfer weights from an empty body"));
    }
    if source.len() != weights.len() {
        return Err(Error::invalid(format!(
            "{} weight rows for {} source vertices",
            weights.len(),
            source.len()
        )));
    }
    let index = PointIndex::new(source);
    let nearest: Vec<usize> = targets
        .par_iter()
        .map(|p| index.nearest(p).expect("index is non-empty"))
        .collect();
    Ok(weights.select(&nearest))
}

fn check_dims(points: &[Point3], weights: &WeightField, pose: &Pose) -> Result<()> {
    if points.len() != weights.len() {
        return Err(Error::invalid(format!(
            "{} points but {} weight rows",
            points.len(),
            weights.len()
        )));
    }
    if weights.joint_count() != pose.joint_count() {
        return Err(Error::invalid(format!(
            "weights have {} joints, pose has {}",
            weights.joint_count(),
            pose.joint_count()
        )));
    }
    Ok(())
}

/// `v' = (sum_i w_i B_i) v` in homogeneous coordinates.
pub fn lbs_forward(points: &[Point3], weights: &WeightField, pose: &Pose) -> Result<Vec<Point3>> {
    check_dims(points, weights, pose)?;
    Ok(points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let m = pose.blend(weights.row(i));
            let h = m * p.to_homogeneous();
            Point3::new(h.x, h.y, h.z)
        })
        .collect())
}

/// `v = (sum_i w_i B_i)^-1 v'`, refusing blends whose condition number
/// reaches [`MAX_BLEND_CONDITION`].
pub fn lbs_inverse(points: &[Point3], weights: &WeightField, pose: &Pose) -> Result<Vec<Point3>> {
    check_dims(points, weights, pose)?;
    let solved: Vec<Result<Point3>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| invert_one(&pose.blend(weights.row(i)), p, i))
        .collect();
    solved.into_iter().collect()
}

fn invert_one(m: &Matrix4<f64>, p: &Point3, vertex: usize) -> Result<Point3> {
    let sv = m.singular_values();
    let condition = sv.max() / sv.min();
    if !(condition < MAX_BLEND_CONDITION) {
        return Err(Error::SingularBlend { vertex, condition });
    }
    let h: Vector4<f64> = m
        .lu()
        .solve(&p.to_homogeneous())
        .ok_or(Error::SingularBlend { vertex, condition })?;
    Ok(Point3::new(h.x / h.w, h.y / h.w, h.z / h.w))
}
