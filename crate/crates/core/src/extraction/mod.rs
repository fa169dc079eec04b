//! Turning a distance field into a double-sided garment mesh.

mod grid;
mod mc;
mod orient;

pub use grid::{bake_grid, bake_model_grid, ScalarGrid};
pub use mc::marching_cubes;
pub use orient::{back_faces, back_vertex_flags, orient_back_faces, DEFAULT_VIEW_DIR, DEFAULT_XI};

/// Default extraction threshold, meters.
pub const DEFAULT_TAU: f64 = 0.003;
/// Default number of grid cells along the longest side of the bounds.
pub const DEFAULT_GRID_RESOLUTION: usize = 256;
