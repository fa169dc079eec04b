use nalgebra::Isometry3;

use super::{Point3, Vec3};
use crate::error::{Error, Result};

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    /// An inverted box that any `grow` call will replace.
    pub fn empty() -> Self {
        Aabb {
            min: Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Self {
        let mut b = Aabb::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn is_empty(&self) -> bool {
        self.min.x > self.max.x
    }

    pub fn grow(&mut self, p: &Point3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn center(&self) -> Point3 {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.contains(&other.min) && self.contains(&other.max)
    }

    /// Grows every side by `margin`.
    pub fn inflated(&self, margin: f64) -> Aabb {
        let m = Vec3::repeat(margin);
        Aabb {
            min: self.min - m,
            max: self.max + m,
        }
    }

    pub fn distance_squared(&self, p: &Point3) -> f64 {
        (0..3)
            .map(|i| {
                let d = (self.min[i] - p[i]).max(0.0).max(p[i] - self.max[i]);
                d * d
            })
            .sum()
    }

    /// Slab test; returns the parametric entry/exit interval clipped to
    /// `[t_min, t_max]`.
    pub fn ray_interval(
        &self,
        origin: &Point3,
        inv_dir: &Vec3,
        t_min: f64,
        t_max: f64,
    ) -> Option<(f64, f64)> {
        let mut lo = t_min;
        let mut hi = t_max;
        for i in 0..3 {
            if inv_dir[i].is_infinite() {
                // Parallel to this slab: either always inside it or never.
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let t0 = (self.min[i] - origin[i]) * inv_dir[i];
            let t1 = (self.max[i] - origin[i]) * inv_dir[i];
            let (a, b) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
            lo = lo.max(a);
            hi = hi.min(b);
            // Relative slack keeps rays grazing a flat box (a leaf holding an
            // axis-aligned face) from being culled by rounding.
            if lo > hi + 1e-12 * (1.0 + lo.abs().min(hi.abs())) {
                return None;
            }
        }
        Some((lo, hi))
    }
}

/// Indexed triangle surface with optional per-vertex garment labels
/// (0 = not garment).
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
    labels: Option<Vec<i32>>,
}

impl TriMesh {
    /// Validates face indices (in range, three distinct per face).
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        for (i, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::invalid(format!(
                    "face {i} references vertex {bad}, mesh has {}",
                    vertices.len()
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::invalid(format!(
                    "face {i} repeats a vertex index: {f:?}"
                )));
            }
        }
        Ok(TriMesh {
            vertices,
            faces,
            labels: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<i32>) -> Result<Self> {
        self.set_labels(Some(labels))?;
        Ok(self)
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    /// Positions may be edited freely; connectivity is fixed.
    pub fn vertices_mut(&mut self) -> &mut [Point3] {
        &mut self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn labels(&self) -> Option<&[i32]> {
        self.labels.as_deref()
    }

    pub fn set_labels(&mut self, labels: Option<Vec<i32>>) -> Result<()> {
        if let Some(l) = &labels {
            if l.len() != self.vertices.len() {
                return Err(Error::invalid(format!(
                    "{} labels for {} vertices",
                    l.len(),
                    self.vertices.len()
                )));
            }
        }
        self.labels = labels;
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Point3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    /// Vertex indices whose label equals `label`.
    pub fn labeled_vertices(&self, label: i32) -> Vec<usize> {
        match &self.labels {
            Some(l) => (0..l.len()).filter(|&i| l[i] == label).collect(),
            None => Vec::new(),
        }
    }

    /// Keeps faces for which `keep` holds, compacting vertices. Returns the
    /// sub-mesh and, per new vertex, its index in `self`.
    pub fn submesh(&self, mut keep: impl FnMut(usize) -> bool) -> (TriMesh, Vec<usize>) {
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut origin = Vec::new();
        let mut faces = Vec::new();
        for (fi, f) in self.faces.iter().enumerate() {
            if !keep(fi) {
                continue;
            }
            let mut nf = [0; 3];
            for (k, &v) in f.iter().enumerate() {
                if remap[v] == usize::MAX {
                    remap[v] = origin.len();
                    origin.push(v);
                }
                nf[k] = remap[v];
            }
            faces.push(nf);
        }
        let vertices = origin.iter().map(|&v| self.vertices[v]).collect();
        let labels = self
            .labels
            .as_ref()
            .map(|l| origin.iter().map(|&v| l[v]).collect());
        (
            TriMesh {
                vertices,
                faces,
                labels,
            },
            origin,
        )
    }

    /// Faces whose three vertices all satisfy `in_set`.
    pub fn faces_within(&self, in_set: &[bool]) -> Vec<bool> {
        self.faces
            .iter()
            .map(|f| f.iter().all(|&v| in_set[v]))
            .collect()
    }

    /// Reverses the winding of face `face`.
    pub fn flip_face(&mut self, face: usize) {
        self.faces[face].swap(0, 2);
    }

    /// Concatenates meshes; labels are kept only if every part has them.
    pub fn merged(parts: &[&TriMesh]) -> TriMesh {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        let all_labeled = parts.iter().all(|m| m.labels.is_some());
        let mut labels = Vec::new();
        for m in parts {
            let off = vertices.len();
            vertices.extend_from_slice(&m.vertices);
            faces.extend(m.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
            if let (true, Some(l)) = (all_labeled, &m.labels) {
                labels.extend_from_slice(l);
            }
        }
        TriMesh {
            vertices,
            faces,
            labels: all_labeled.then_some(labels),
        }
    }

    pub fn transformed(&self, iso: &Isometry3<f64>) -> TriMesh {
        let mut out = self.clone();
        out.vertices.iter_mut().for_each(|p| *p = iso * *p);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> TriMesh {
        TriMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn rejects_out_of_range_and_repeated_indices() {
        let v = tri().vertices().to_vec();
        assert!(TriMesh::new(v.clone(), vec![[0, 1, 3]]).is_err());
        assert!(TriMesh::new(v, vec![[0, 1, 1]]).is_err());
    }

    #[test]
    fn labels_must_match_vertex_count() {
        assert!(tri().with_labels(vec![1, 0]).is_err());
        assert!(tri().with_labels(vec![1, 0, 1]).is_ok());
    }

    #[test]
    fn submesh_compacts_vertices() {
        let mut m = TriMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(5.0, 5.0, 5.0),
                Point3::new(6.0, 5.0, 5.0),
            ],
            vec![[0, 1, 2], [2, 3, 4]],
        )
        .unwrap();
        m.set_labels(Some(vec![0, 1, 2, 3, 4])).unwrap();
        let (sub, origin) = m.submesh(|f| f == 1);
        assert_eq!(origin, vec![2, 3, 4]);
        assert_eq!(sub.faces(), &[[0, 1, 2]]);
        assert_eq!(sub.labels().unwrap(), &[2, 3, 4]);
    }

    #[test]
    fn ray_interval_handles_axis_parallel_rays() {
        let b = Aabb {
            min: Point3::new(0.0, 0.0, 0.0),
            max: Point3::new(1.0, 1.0, 1.0),
        };
        let o = Point3::new(-1.0, 0.5, 0.5);
        let dir = Vec3::new(1.0, 0.0, 0.0);
        let inv = dir.map(|d| 1.0 / d);
        let (lo, hi) = b.ray_interval(&o, &inv, 0.0, f64::INFINITY).unwrap();
        assert_eq!((lo, hi), (1.0, 2.0));
        let miss = Point3::new(-1.0, 2.0, 0.5);
        assert!(b.ray_interval(&miss, &inv, 0.0, f64::INFINITY).is_none());
        // Origin exactly on a slab plane the ray runs parallel to.
        for y in [0.0, 1.0] {
            let edge = Point3::new(-1.0, y, 0.5);
            assert_eq!(b.ray_interval(&edge, &inv, f64::NEG_INFINITY, f64::INFINITY), Some((1.0, 2.0)));
        }
    }
}
