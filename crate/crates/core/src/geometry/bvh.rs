use std::f64::consts::PI;

use super::primitives::{closest_point_on_triangle, ray_triangle, triangle_solid_angle};
use super::{Aabb, Point3, TriMesh, Vec3};
use crate::error::{Error, Result};

/// Ray hits at or below this parameter (meters) are discarded.
pub const RAY_T_MIN: f64 = 1e-7;

const LEAF_SIZE: usize = 4;
/// Faces whose distance is within this of the minimum count as tied; the
/// lowest face index wins.
const TIE_EPS: f64 = 1e-12;
/// Far-field acceptance ratio for the dipole winding-number approximation.
const WINDING_BETA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestHit {
    pub point: Point3,
    pub face: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub face: usize,
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: first slot in `order`. Internal: index of the right child (the
    /// left child always follows its parent).
    start: usize,
    /// Number of faces for a leaf, 0 for internal nodes.
    count: usize,
    /// Sum of the vector areas of all faces below this node.
    area_normal: Vec3,
    /// Area-weighted centroid of the faces below this node.
    center: Point3,
    /// Distance from `center` to the farthest vertex below this node.
    radius: f64,
}

/// Bounding-volume hierarchy over the faces of one mesh.
///
/// The index snapshots the mesh when built and never changes afterwards, so
/// it can be shared between threads for concurrent read-only queries.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    mesh: TriMesh,
    nodes: Vec<Node>,
    order: Vec<usize>,
}

impl SpatialIndex {
    pub fn new(mesh: &TriMesh) -> Result<Self> {
        if mesh.is_empty() {
            return Err(Error::invalid("cannot index a mesh without faces"));
        }
        let mut order: Vec<usize> = (0..mesh.face_count()).collect();
        let centroids: Vec<Point3> = (0..mesh.face_count())
            .map(|f| {
                let [a, b, c] = mesh.triangle(f);
                Point3::from((a.coords + b.coords + c.coords) / 3.0)
            })
            .collect();
        let mut nodes = Vec::with_capacity(2 * mesh.face_count() / LEAF_SIZE + 1);
        let n = order.len();
        build_range(mesh, &centroids, &mut order, 0, n, &mut nodes);
        Ok(SpatialIndex {
            mesh: mesh.clone(),
            nodes,
            order,
        })
    }

    /// The indexed geometry.
    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.count > 0).count()
    }

    /// Leaf bounds with the faces stored in each leaf.
    pub fn leaves(&self) -> impl Iterator<Item = (Aabb, &[usize])> {
        self.nodes
            .iter()
            .filter(|n| n.count > 0)
            .map(|n| (n.bounds, &self.order[n.start..n.start + n.count]))
    }

    fn face_distance(&self, q: &Point3, face: usize) -> (Point3, f64) {
        let [a, b, c] = self.mesh.triangle(face);
        let p = closest_point_on_triangle(q, &a, &b, &c);
        (p, (q - p).norm())
    }

    /// Globally closest surface point. Equidistant faces resolve to the
    /// lowest face index.
    pub fn closest_point(&self, q: &Point3) -> ClosestHit {
        let mut best = f64::INFINITY;
        let mut candidates: Vec<(usize, Point3, f64)> = Vec::new();
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            let bound = best + TIE_EPS;
            if node.bounds.distance_squared(q) > bound * bound {
                continue;
            }
            if node.count > 0 {
                for &f in &self.order[node.start..node.start + node.count] {
                    let (p, d) = self.face_distance(q, f);
                    if d <= best + TIE_EPS {
                        candidates.push((f, p, d));
                        best = best.min(d);
                    }
                }
            } else {
                let (l, r) = (ni + 1, node.start);
                let dl = self.nodes[l].bounds.distance_squared(q);
                let dr = self.nodes[r].bounds.distance_squared(q);
                // Visit the nearer child first.
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        let (face, point, distance) = candidates
            .into_iter()
            .filter(|c| c.2 <= best + TIE_EPS)
            .min_by_key(|c| c.0)
            .expect("non-empty index always yields a face");
        ClosestHit {
            point,
            face,
            distance,
        }
    }

    pub fn unsigned_distance(&self, q: &Point3) -> f64 {
        self.closest_point(q).distance
    }

    /// All crossings with `t > RAY_T_MIN`, sorted by `t` then face index.
    /// `dir` is normalized, so `t` is in meters.
    pub fn ray_intersections(&self, origin: &Point3, dir: &Vec3) -> Result<Vec<RayHit>> {
        let len = dir.norm();
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::invalid("ray direction must be a non-zero vector"));
        }
        Ok(self.hits_in_range(origin, &(dir / len), RAY_T_MIN, f64::INFINITY, 0.0))
    }

    /// Crossings of the full line `point + t * dir` for any real `t`, with
    /// a barycentric `slack` so hits exactly on shared edges are not lost.
    pub fn line_intersections(&self, point: &Point3, dir: &Vec3, slack: f64) -> Vec<RayHit> {
        self.hits_in_range(point, dir, f64::NEG_INFINITY, f64::INFINITY, slack)
    }

    fn hits_in_range(
        &self,
        origin: &Point3,
        dir: &Vec3,
        t_min: f64,
        t_max: f64,
        slack: f64,
    ) -> Vec<RayHit> {
        let inv = dir.map(|d| 1.0 / d);
        let mut hits = Vec::new();
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds.ray_interval(origin, &inv, t_min, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                for &f in &self.order[node.start..node.start + node.count] {
                    let [a, b, c] = self.mesh.triangle(f);
                    if let Some(t) = ray_triangle(origin, dir, &a, &b, &c, slack) {
                        if t > t_min && t <= t_max {
                            hits.push(RayHit { t, face: f });
                        }
                    }
                }
            } else {
                stack.push(node.start);
                stack.push(ni + 1);
            }
        }
        hits.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.face.cmp(&b.face)));
        hits
    }

    /// Generalized winding number of the indexed surface around `q`.
    ///
    /// Clusters far from `q` (relative to their extent) are approximated by
    /// their dipole term; everything else is summed exactly per triangle.
    pub fn winding_number(&self, q: &Point3) -> f64 {
        let mut total = 0.0;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            let r = node.center - q;
            let dist = r.norm();
            if dist > WINDING_BETA * node.radius {
                total += r.dot(&node.area_normal) / (dist * dist * dist);
                continue;
            }
            if node.count > 0 {
                for &f in &self.order[node.start..node.start + node.count] {
                    let [a, b, c] = self.mesh.triangle(f);
                    total += triangle_solid_angle(q, &a, &b, &c);
                }
            } else {
                stack.push(node.start);
                stack.push(ni + 1);
            }
        }
        total / (4.0 * PI)
    }

    /// Inside test for closed meshes: winding number above one half.
    pub fn contains_point(&self, q: &Point3) -> bool {
        self.winding_number(q) > 0.5
    }
}

fn build_range(
    mesh: &TriMesh,
    centroids: &[Point3],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let faces = &order[start..end];
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    let mut area_normal = Vec3::zeros();
    let mut weighted = Vec3::zeros();
    let mut area_sum = 0.0;
    for &f in faces {
        let [a, b, c] = mesh.triangle(f);
        bounds.grow(&a);
        bounds.grow(&b);
        bounds.grow(&c);
        cbounds.grow(&centroids[f]);
        let vector_area = 0.5 * (b - a).cross(&(c - a));
        let area = vector_area.norm();
        area_normal += vector_area;
        weighted += centroids[f].coords * area;
        area_sum += area;
    }
    let center = if area_sum > 0.0 {
        Point3::from(weighted / area_sum)
    } else {
        bounds.center()
    };
    let radius = faces
        .iter()
        .flat_map(|&f| mesh.triangle(f))
        .map(|p| (p - center).norm())
        .fold(0.0, f64::max);

    let me = nodes.len();
    nodes.push(Node {
        bounds,
        start,
        count: faces.len(),
        area_normal,
        center,
        radius,
    });
    if faces.len() <= LEAF_SIZE {
        return me;
    }

    let ext = cbounds.extent();
    let axis = if ext.x >= ext.y && ext.x >= ext.z {
        0
    } else if ext.y >= ext.z {
        1
    } else {
        2
    };
    let mid = (end - start) / 2;
    order[start..end].select_nth_unstable_by(mid, |&a, &b| {
        centroids[a][axis]
            .total_cmp(&centroids[b][axis])
            .then(a.cmp(&b))
    });
    build_range(mesh, centroids, order, start, start + mid, nodes);
    let right = build_range(mesh, centroids, order, start + mid, end, nodes);
    nodes[me].start = right;
    nodes[me].count = 0;
    me
}
