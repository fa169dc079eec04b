//! Triangle meshes, spatial queries and mesh file I/O.
//!
//! All coordinates are meters. [`TriMesh`] is a plain value type; a
//! [`SpatialIndex`] snapshots the mesh geometry at build time and answers
//! closest-point, ray, winding-number and distance queries against it.

mod bvh;
pub mod io;
mod kdtree;
mod mesh;
mod normals;
mod primitives;
mod topology;
mod winding;

pub use bvh::{ClosestHit, RayHit, SpatialIndex, RAY_T_MIN};
pub use kdtree::PointIndex;
pub use mesh::{Aabb, TriMesh};
pub use normals::{face_normal, face_normals, normals, vertex_normals};
pub use primitives::{closest_point_on_triangle, ray_triangle, triangle_solid_angle};
pub use topology::{connected_components, vertex_neighbors};
pub use winding::winding_number_exact;

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;
