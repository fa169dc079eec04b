use super::{TriMesh, Vec3};
use crate::error::{Error, Result};

/// Unit normal of one face, following counter-clockwise winding.
pub fn face_normal(mesh: &TriMesh, face: usize) -> Result<Vec3> {
    let [a, b, c] = mesh.triangle(face);
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    if !(len > 0.0) || !len.is_finite() {
        return Err(Error::DegenerateFace { face });
    }
    Ok(n / len)
}

pub fn face_normals(mesh: &TriMesh) -> Result<Vec<Vec3>> {
    (0..mesh.face_count()).map(|f| face_normal(mesh, f)).collect()
}

/// Area-weighted vertex normals. Vertices referenced by no face get a zero
/// vector.
pub fn vertex_normals(mesh: &TriMesh) -> Result<Vec<Vec3>> {
    let mut acc = vec![Vec3::zeros(); mesh.vertex_count()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let [a, b, c] = mesh.triangle(fi);
        // The unnormalized cross product is twice the area times the normal.
        let n = (b - a).cross(&(c - a));
        if !(n.norm() > 0.0) {
            return Err(Error::DegenerateFace { face: fi });
        }
        for &v in f {
            acc[v] += n;
        }
    }
    for n in &mut acc {
        let len = n.norm();
        if len > 0.0 {
            *n /= len;
        }
    }
    Ok(acc)
}

/// Per-face and per-vertex unit normals.
pub fn normals(mesh: &TriMesh) -> Result<(Vec<Vec3>, Vec<Vec3>)> {
    Ok((face_normals(mesh)?, vertex_normals(mesh)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use crate::synthgen::shapes::icosphere;

    fn tri(order: [usize; 3]) -> TriMesh {
        TriMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![order],
        )
        .unwrap()
    }

    #[test]
    fn ccw_triangle_faces_plus_z() {
        assert_eq!(face_normal(&tri([0, 1, 2]), 0).unwrap(), Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn flipping_negates() {
        let n = face_normal(&tri([0, 1, 2]), 0).unwrap();
        let m = face_normal(&tri([2, 1, 0]), 0).unwrap();
        assert_eq!(n, -m);
    }

    #[test]
    fn zero_area_face_is_named() {
        let m = TriMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(2.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 3], [0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(face_normals(&m), Err(Error::DegenerateFace { face: 1 })));
    }

    #[test]
    fn sphere_vertex_normals_are_radial() {
        let sphere = icosphere(1.0, 4);
        let vn = vertex_normals(&sphere).unwrap();
        for (p, n) in sphere.vertices().iter().zip(&vn) {
            assert!((n.norm() - 1.0).abs() < 1e-12);
            assert!((n - p.coords.normalize()).norm() < 1e-2);
        }
    }
}
