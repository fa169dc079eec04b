use std::f64::consts::PI;

use super::primitives::triangle_solid_angle;
use super::{Point3, TriMesh};

/// Generalized winding number by direct summation over every face.
pub fn winding_number_exact(mesh: &TriMesh, q: &Point3) -> f64 {
    let total: f64 = (0..mesh.face_count())
        .map(|f| {
            let [a, b, c] = mesh.triangle(f);
            triangle_solid_angle(q, &a, &b, &c)
        })
        .sum();
    total / (4.0 * PI)
}
