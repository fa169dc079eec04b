use std::path::Path;

use image::GrayImage;
use rayon::prelude::*;

use super::camera::Camera;
use super::raster::{render_buffers, RenderBuffers};
use crate::error::{Error, Result};
use crate::geometry::{connected_components, vertex_neighbors, Point3, TriMesh};

/// Depth slack (meters) when deciding whether a vertex is visible.
pub const VISIBILITY_TOLERANCE: f64 = 0.005;
/// Default number of majority-smoothing rounds in [`refine_labels`].
pub const DEFAULT_SMOOTHING_ITERS: usize = 3;

/// Binary garment mask of one view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl LabelMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "mask of {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(LabelMask { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        LabelMask {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    /// Reads a PNG or PGM; any nonzero gray level counts as garment.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)?.to_luma8();
        let (w, h) = img.dimensions();
        Ok(LabelMask {
            width: w as usize,
            height: h as usize,
            data: img.pixels().map(|p| p.0[0] != 0).collect(),
        })
    }

    /// Writes 0/255 gray levels; format follows the extension (png, pgm).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
        let img = GrayImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches dimensions");
        img.save(path)?;
        Ok(())
    }
}

/// Pixel whose center ray sees `p`, if `p` projects inside the image and its
/// depth is within [`VISIBILITY_TOLERANCE`] of the surface drawn there.
pub fn visible_pixel(camera: &Camera, buffers: &RenderBuffers, p: &Point3) -> Option<(usize, usize)> {
    let pr = camera.project(p)?;
    if !(pr.x >= 0.0 && pr.y >= 0.0) {
        return None;
    }
    let (x, y) = (pr.x.floor() as usize, pr.y.floor() as usize);
    if x >= buffers.width || y >= buffers.height {
        return None;
    }
    let d = buffers.depth[buffers.index(x, y)];
    (d.is_finite() && pr.depth <= d + VISIBILITY_TOLERANCE).then_some((x, y))
}

/// Labels a vertex `garment_label` when a strict majority of the views that
/// see it mark its pixel as garment; all other vertices get 0.
pub fn vote_vertex_labels(mesh: &TriMesh, views: &[(Camera, LabelMask)], garment_label: i32) -> Result<Vec<i32>> {
    if views.is_empty() {
        return Err(Error::invalid("label voting needs at least one view"));
    }
    for (i, (cam, mask)) in views.iter().enumerate() {
        if cam.width() != mask.width || cam.height() != mask.height {
            return Err(Error::invalid(format!(
                "view {i}: mask is {}x{} but camera renders {}x{}",
                mask.width,
                mask.height,
                cam.width(),
                cam.height()
            )));
        }
    }
    // Per view: (visible, garment hit) for every vertex.
    let per_view: Vec<Vec<(bool, bool)>> = views
        .par_iter()
        .map(|(cam, mask)| {
            let buf = render_buffers(&[mesh], cam);
            mesh.vertices()
                .iter()
                .map(|p| match visible_pixel(cam, &buf, p) {
                    Some((x, y)) => (true, mask.get(x, y)),
                    None => (false, false),
                })
                .collect()
        })
        .collect();
    Ok((0..mesh.vertex_count())
        .map(|v| {
            let (seen, hits) = per_view.iter().fold((0usize, 0usize), |(s, h), view| {
                let (vis, hit) = view[v];
                (s + usize::from(vis), h + usize::from(hit))
            });
            if seen > 0 && 2 * hits > seen {
                garment_label
            } else {
                0
            }
        })
        .collect())
}

/// Keeps only the largest connected component of every nonzero label, then
/// runs `smoothing_iters` synchronous rounds of 1-ring majority voting
/// (the vertex itself votes too; ties keep the current label).
pub fn refine_labels(mesh: &TriMesh, labels: &[i32], smoothing_iters: usize) -> Result<Vec<i32>> {
    if labels.len() != mesh.vertex_count() {
        return Err(Error::invalid(format!(
            "{} labels for {} vertices",
            labels.len(),
            mesh.vertex_count()
        )));
    }
    let mut out = labels.to_vec();
    let mut values: Vec<i32> = labels.iter().copied().filter(|&l| l != 0).collect();
    values.sort_unstable();
    values.dedup();
    for &value in &values {
        let members: Vec<usize> = (0..labels.len()).filter(|&v| labels[v] == value).collect();
        for comp in connected_components(mesh, &members).iter().skip(1) {
            for &v in comp {
                out[v] = 0;
            }
        }
    }
    let neighbors = vertex_neighbors(mesh);
    for _ in 0..smoothing_iters {
        out = majority_pass(&out, &neighbors);
    }
    Ok(out)
}

pub(crate) fn majority_pass(labels: &[i32], neighbors: &[Vec<usize>]) -> Vec<i32> {
    (0..labels.len())
        .map(|v| {
            let current = labels[v];
            let mut votes: Vec<(i32, usize)> = vec![(current, 1)];
            for &n in &neighbors[v] {
                let l = labels[n];
                match votes.iter_mut().find(|(x, _)| *x == l) {
                    Some(e) => e.1 += 1,
                    None => votes.push((l, 1)),
                }
            }
            let best = votes.iter().map(|e| e.1).max().unwrap();
            if votes[0].1 == best {
                current
            } else {
                votes
                    .iter()
                    .filter(|e| e.1 == best)
                    .map(|e| e.0)
                    .min()
                    .unwrap()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rasterview::camera::Projection;
    use crate::synthgen::shapes::grid_patch;
    use nalgebra::Matrix4;

    #[test]
    fn full_mask_labels_visible_vertices() {
        let patch = grid_patch(1.0, 4).transformed(&nalgebra::Isometry3::translation(0.0, 0.0, -2.0));
        let cam = Camera::new(Projection::Orthographic { extent: 2.0 }, Matrix4::identity(), [64, 64]).unwrap();
        let on = vote_vertex_labels(&patch, &[(cam.clone(), LabelMask::filled(64, 64, true))], 3).unwrap();
        let buf = render_buffers(&[&patch], &cam);
        for (p, &l) in patch.vertices().iter().zip(&on) {
            let visible = visible_pixel(&cam, &buf, p).is_some();
            assert_eq!(l == 3, visible);
            // Silhouette vertices may sample a background pixel; interior
            // ones never do.
            if p.x.abs() < 0.5 && p.y.abs() < 0.5 {
                assert!(visible);
            }
        }
        let off = vote_vertex_labels(&patch, &[(cam, LabelMask::filled(64, 64, false))], 3).unwrap();
        assert!(off.iter().all(|&l| l == 0));
    }

    #[test]
    fn mask_size_must_match_camera() {
        let patch = grid_patch(1.0, 2);
        let cam = Camera::new(Projection::Orthographic { extent: 2.0 }, Matrix4::identity(), [8, 8]).unwrap();
        assert!(vote_vertex_labels(&patch, &[(cam, LabelMask::filled(4, 8, true))], 1).is_err());
        assert!(vote_vertex_labels(&patch, &[], 1).is_err());
    }

    #[test]
    fn isolated_vertex_is_cleared_and_zero_iters_keep_labels() {
        let g = grid_patch(1.0, 10);
        let n = 11;
        let mut labels = vec![0; g.vertex_count()];
        for j in 2..6 {
            for i in 2..6 {
                labels[j * n + i] = 1;
            }
        }
        let clean = labels.clone();
        assert_eq!(refine_labels(&g, &labels, 0).unwrap(), clean);
        labels[9 * n + 9] = 1;
        assert_eq!(refine_labels(&g, &labels, 0).unwrap(), clean);
    }

    #[test]
    fn smoothing_never_invents_labels() {
        let g = grid_patch(1.0, 6);
        let labels: Vec<i32> = (0..g.vertex_count()).map(|v| [0, 2, 5][v % 3]).collect();
        let out = refine_labels(&g, &labels, 3).unwrap();
        assert!(out.iter().all(|l| [0, 2, 5].contains(l)));
    }

    #[test]
    fn mask_png_and_pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mask = LabelMask::new(3, 2, vec![true, false, false, true, true, false]).unwrap();
        for name in ["m.png", "m.pgm"] {
            let path = dir.path().join(name);
            mask.save(&path).unwrap();
            assert_eq!(LabelMask::load(&path).unwrap(), mask);
        }
    }
}
