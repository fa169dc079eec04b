use super::camera::{Camera, Projection};
use crate::geometry::TriMesh;

/// Face/mesh id of pixels nothing was drawn on.
pub const BACKGROUND: u32 = u32::MAX;

/// Vertex positions are snapped to 1/256 pixel so coverage tests are exact
/// integer arithmetic.
const SUBPIXEL: f64 = 256.0;
/// Triangles reaching further than this many pixels off-screen are skipped
/// (keeps the fixed-point products far from overflow).
const MAX_COORD: f64 = (1u64 << 20) as f64;

/// Depth and id rasters of one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderBuffers {
    pub width: usize,
    pub height: usize,
    /// View depth in meters, `+inf` on background.
    pub depth: Vec<f64>,
    /// Face index within its mesh, [`BACKGROUND`] on background.
    pub face_id: Vec<u32>,
    /// Position of the mesh in the rendered list, [`BACKGROUND`] on background.
    pub mesh_id: Vec<u32>,
}

impl RenderBuffers {
    fn new(width: usize, height: usize) -> Self {
        RenderBuffers {
            width,
            height,
            depth: vec![f64::INFINITY; width * height],
            face_id: vec![BACKGROUND; width * height],
            mesh_id: vec![BACKGROUND; width * height],
        }
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    /// `(mesh, face)` drawn at pixel `(x, y)`.
    pub fn hit(&self, x: usize, y: usize) -> Option<(usize, usize)> {
        let i = self.index(x, y);
        (self.face_id[i] != BACKGROUND).then(|| (self.mesh_id[i] as usize, self.face_id[i] as usize))
    }

    pub fn covered_pixels(&self) -> usize {
        self.face_id.iter().filter(|&&f| f != BACKGROUND).count()
    }
}

/// Z-buffer rasterization of `meshes` (drawn in list order, faces in index
/// order). Samples are taken at pixel centers with the top-left fill rule;
/// nothing is culled. A pixel keeps the first surface drawn at the smallest
/// depth, so results are fully deterministic.
pub fn render_buffers(meshes: &[&TriMesh], camera: &Camera) -> RenderBuffers {
    let mut buf = RenderBuffers::new(camera.width(), camera.height());
    let perspective = matches!(camera.projection, Projection::Perspective { .. });
    for (mi, mesh) in meshes.iter().enumerate() {
        let projected: Vec<_> = mesh.vertices().iter().map(|p| camera.project(p)).collect();
        for (fi, f) in mesh.faces().iter().enumerate() {
            let (Some(a), Some(b), Some(c)) = (projected[f[0]], projected[f[1]], projected[f[2]]) else {
                continue;
            };
            let verts = [(a.x, a.y, a.depth), (b.x, b.y, b.depth), (c.x, c.y, c.depth)];
            draw_triangle(&mut buf, verts, perspective, mi as u32, fi as u32);
        }
    }
    buf
}

#[derive(Clone, Copy)]
struct Fixed {
    x: i64,
    y: i64,
}

fn edge(a: Fixed, b: Fixed, p: Fixed) -> i64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Pixels exactly on an edge belong to the triangle only for top or left
/// edges. The interior lies along the edge function's gradient `(-dy, dx)`.
fn is_top_left(a: Fixed, b: Fixed) -> bool {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    (dy == 0 && dx > 0) || dy < 0
}

fn draw_triangle(buf: &mut RenderBuffers, mut v: [(f64, f64, f64); 3], perspective: bool, mesh: u32, face: u32) {
    if v.iter().any(|&(x, y, z)| !(x.abs() < MAX_COORD && y.abs() < MAX_COORD && z.is_finite())) {
        return;
    }
    let snap = |(x, y, _): (f64, f64, f64)| Fixed {
        x: (x * SUBPIXEL).round() as i64,
        y: (y * SUBPIXEL).round() as i64,
    };
    let mut p = [snap(v[0]), snap(v[1]), snap(v[2])];
    let mut area = edge(p[0], p[1], p[2]);
    if area == 0 {
        return;
    }
    if area < 0 {
        p.swap(1, 2);
        v.swap(1, 2);
        area = -area;
    }
    let half = (SUBPIXEL / 2.0) as i64;
    let step = SUBPIXEL as i64;
    let min_x = p.iter().map(|q| q.x).min().unwrap();
    let max_x = p.iter().map(|q| q.x).max().unwrap();
    let min_y = p.iter().map(|q| q.y).min().unwrap();
    let max_y = p.iter().map(|q| q.y).max().unwrap();
    let x0 = (min_x - half).div_euclid(step) + i64::from((min_x - half).rem_euclid(step) != 0);
    let x1 = (max_x - half).div_euclid(step);
    let y0 = (min_y - half).div_euclid(step) + i64::from((min_y - half).rem_euclid(step) != 0);
    let y1 = (max_y - half).div_euclid(step);
    let x0 = x0.max(0);
    let y0 = y0.max(0);
    let x1 = x1.min(buf.width as i64 - 1);
    let y1 = y1.min(buf.height as i64 - 1);
    if x0 > x1 || y0 > y1 {
        return;
    }
    let tl = [is_top_left(p[1], p[2]), is_top_left(p[2], p[0]), is_top_left(p[0], p[1])];
    let inv_area = 1.0 / area as f64;
    let z = [v[0].2, v[1].2, v[2].2];
    for py in y0..=y1 {
        for px in x0..=x1 {
            let s = Fixed {
                x: px * step + half,
                y: py * step + half,
            };
            let w = [edge(p[1], p[2], s), edge(p[2], p[0], s), edge(p[0], p[1], s)];
            if (0..3).any(|k| w[k] < 0 || (w[k] == 0 && !tl[k])) {
                continue;
            }
            let b = [w[0] as f64 * inv_area, w[1] as f64 * inv_area, w[2] as f64 * inv_area];
            let depth = if perspective {
                1.0 / (b[0] / z[0] + b[1] / z[1] + b[2] / z[2])
            } else {
                b[0] * z[0] + b[1] * z[1] + b[2] * z[2]
            };
            let i = buf.index(px as usize, py as usize);
            if depth < buf.depth[i] {
                buf.depth[i] = depth;
                buf.face_id[i] = face;
                buf.mesh_id[i] = mesh;
            }
        }
    }
}
