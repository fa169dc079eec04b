use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointIndex, TriMesh, Vec3};

/// Default viewing direction of the orientation camera.
pub const DEFAULT_VIEW_DIR: [f64; 3] = [0.0, 0.0, -1.0];
/// Default depth (meters) behind the nearest joint beyond which a vertex
/// counts as back-facing.
pub const DEFAULT_XI: f64 = 0.005;

/// Per-vertex flip flags: a vertex is flagged when it lies more than `xi`
/// behind its nearest joint along the viewing direction `view_dir`.
pub fn back_vertex_flags(mesh: &TriMesh, joints: &[Point3], view_dir: &Vec3, xi: f64) -> Result<Vec<bool>> {
    if joints.is_empty() {
        return Err(Error::invalid("face orientation needs at least one joint"));
    }
    let len = view_dir.norm();
    if !(len > 0.0 && len.is_finite()) {
        return Err(Error::invalid("viewing direction must be a non-zero vector"));
    }
    let d = view_dir / len;
    let index = PointIndex::new(joints);
    Ok(mesh
        .vertices()
        .par_iter()
        .map(|v| {
            let j = joints[index.nearest(v).expect("joints are non-empty")];
            (v - j).dot(&d) > xi
        })
        .collect())
}

/// Faces all of whose vertices are flagged by [`back_vertex_flags`].
pub fn back_faces(mesh: &TriMesh, joints: &[Point3], view_dir: &Vec3, xi: f64) -> Result<Vec<bool>> {
    let flags = back_vertex_flags(mesh, joints, view_dir, xi)?;
    Ok(mesh.faces().par_iter().map(|f| f.iter().all(|&v| flags[v])).collect())
}

/// Reverses the winding of every back face; vertices, labels and all other
/// faces are left alone. Applying it twice restores the input.
pub fn orient_back_faces(mesh: &TriMesh, joints: &[Point3], view_dir: &Vec3, xi: f64) -> Result<TriMesh> {
    let flip = back_faces(mesh, joints, view_dir, xi)?;
    let mut out = mesh.clone();
    for (f, _) in flip.iter().enumerate().filter(|(_, &b)| b) {
        out.flip_face(f);
    }
    Ok(out)
}
