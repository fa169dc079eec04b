//! Deterministic software rasterization (depth, face and mesh ids) and the
//! multi-view label transfer built on it: mask voting per vertex, then
//! component filtering and majority smoothing.

mod camera;
mod labels;
mod raster;

pub use camera::{
    load_cameras, sample_turntable_views, sample_views, save_cameras, Camera, Projected, Projection,
    TurntableLayout, NEAR_PLANE,
};
pub use labels::{
    refine_labels, visible_pixel, vote_vertex_labels, LabelMask, DEFAULT_SMOOTHING_ITERS, VISIBILITY_TOLERANCE,
};
pub use raster::{render_buffers, RenderBuffers, BACKGROUND};
