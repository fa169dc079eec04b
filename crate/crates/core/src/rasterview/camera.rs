use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, Vec3};

/// Points closer to a perspective camera than this (meters) are not drawn.
pub const NEAR_PLANE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Projection {
    /// `extent` is the full visible height in meters.
    Orthographic { extent: f64 },
    /// `fov` is the full vertical field of view in radians.
    Perspective { fov: f64 },
}

/// A pinhole or orthographic camera. In camera space the view direction is
/// `-z` and `+y` is up; image rows grow downwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    #[serde(flatten)]
    pub projection: Projection,
    /// World-to-camera rigid transform, row-major.
    #[serde(with = "matrix_rows")]
    pub extrinsic: Matrix4<f64>,
    pub resolution: [u32; 2],
}

/// Position of a point on the image plane together with its view depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projected {
    /// Pixel coordinates; pixel `(i, j)` spans `[i, i+1) x [j, j+1)`.
    pub x: f64,
    pub y: f64,
    /// Distance along the view axis (meters).
    pub depth: f64,
}

impl Camera {
    pub fn new(projection: Projection, extrinsic: Matrix4<f64>, resolution: [u32; 2]) -> Result<Self> {
        let cam = Camera {
            projection,
            extrinsic,
            resolution,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera at `eye` looking at `target` with `up` roughly vertical.
    pub fn look_at(
        projection: Projection,
        eye: &Point3,
        target: &Point3,
        up: &Vec3,
        resolution: [u32; 2],
    ) -> Result<Self> {
        let forward = target - eye;
        if forward.norm() == 0.0 || forward.cross(up).norm() < 1e-12 * forward.norm() * up.norm() {
            return Err(Error::invalid("look-at direction is degenerate"));
        }
        let iso = nalgebra::Isometry3::look_at_rh(eye, target, up);
        Camera::new(projection, iso.to_homogeneous(), resolution)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution[0] == 0 || self.resolution[1] == 0 {
            return Err(Error::invalid("camera resolution must be at least 1x1"));
        }
        match self.projection {
            Projection::Orthographic { extent } if !(extent > 0.0) => {
                return Err(Error::invalid("orthographic extent must be positive"))
            }
            Projection::Perspective { fov } if !(fov > 0.0 && fov < PI) => {
                return Err(Error::invalid("field of view must lie in (0, pi)"))
            }
            _ => {}
        }
        let r = self.extrinsic.fixed_view::<3, 3>(0, 0);
        if (r.transpose() * r - nalgebra::Matrix3::identity()).abs().max() > 1e-6 {
            return Err(Error::invalid("camera extrinsic is not rigid"));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.resolution[0] as usize
    }

    pub fn height(&self) -> usize {
        self.resolution[1] as usize
    }

    pub fn to_camera(&self, p: &Point3) -> Point3 {
        let h = self.extrinsic * Vector4::new(p.x, p.y, p.z, 1.0);
        Point3::new(h.x, h.y, h.z)
    }

    /// Camera center in world space (for perspective cameras).
    pub fn eye(&self) -> Point3 {
        let inv = self.inverse();
        Point3::new(inv[(0, 3)], inv[(1, 3)], inv[(2, 3)])
    }

    fn inverse(&self) -> Matrix4<f64> {
        let r = self.extrinsic.fixed_view::<3, 3>(0, 0).transpose();
        let t = self.extrinsic.fixed_view::<3, 1>(0, 3);
        let mut inv = Matrix4::identity();
        inv.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        inv.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-(r * t)));
        inv
    }

    fn half_extents(&self) -> (f64, f64) {
        let aspect = self.width() as f64 / self.height() as f64;
        let half_h = match self.projection {
            Projection::Orthographic { extent } => 0.5 * extent,
            Projection::Perspective { fov } => (0.5 * fov).tan(),
        };
        (half_h * aspect, half_h)
    }

    /// `None` when the point lies behind a perspective camera's near plane.
    pub fn project(&self, p: &Point3) -> Option<Projected> {
        let c = self.to_camera(p);
        let depth = -c.z;
        let (hw, hh) = self.half_extents();
        let (u, v) = match self.projection {
            Projection::Orthographic { .. } => (c.x / hw, c.y / hh),
            Projection::Perspective { .. } => {
                if depth <= NEAR_PLANE {
                    return None;
                }
                (c.x / (depth * hw), c.y / (depth * hh))
            }
        };
        Some(Projected {
            x: 0.5 * (u + 1.0) * self.width() as f64,
            y: 0.5 * (1.0 - v) * self.height() as f64,
            depth,
        })
    }

    /// World-space ray through image position `(x, y)` (pixel units).
    /// The ray parameter equals view depth for orthographic cameras.
    pub fn ray(&self, x: f64, y: f64) -> (Point3, Vec3) {
        let (hw, hh) = self.half_extents();
        let u = 2.0 * x / self.width() as f64 - 1.0;
        let v = 1.0 - 2.0 * y / self.height() as f64;
        let inv = self.inverse();
        let to_world = |p: Point3| {
            let h = inv * Vector4::new(p.x, p.y, p.z, 1.0);
            Point3::new(h.x, h.y, h.z)
        };
        let rot = inv.fixed_view::<3, 3>(0, 0).into_owned();
        match self.projection {
            Projection::Orthographic { .. } => {
                let origin = to_world(Point3::new(u * hw, v * hh, 0.0));
                (origin, rot * Vec3::new(0.0, 0.0, -1.0))
            }
            Projection::Perspective { .. } => {
                let dir = rot * Vec3::new(u * hw, v * hh, -1.0);
                (self.eye(), dir.normalize())
            }
        }
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Camera> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cam: Camera =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.line(), e.to_string()))?;
        cam.validate().map_err(|e| Error::format(path, 0, e.to_string()))?;
        Ok(cam)
    }
}

/// Reads/writes a list of cameras as a JSON array.
pub fn save_cameras(path: impl AsRef<Path>, cameras: &[Camera]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, serde_json::to_string_pretty(cameras)?).map_err(|e| Error::io(path, e))
}

pub fn load_cameras(path: impl AsRef<Path>) -> Result<Vec<Camera>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let cams: Vec<Camera> =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.line(), e.to_string()))?;
    for (i, c) in cams.iter().enumerate() {
        c.validate()
            .map_err(|e| Error::format(path, 0, format!("camera {i}: {e}")))?;
    }
    Ok(cams)
}

mod matrix_rows {
    use nalgebra::Matrix4;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix4<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: [[f64; 4]; 4] = std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]));
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix4<f64>, D::Error> {
        let rows = <[[f64; 4]; 4]>::deserialize(d)?;
        Ok(Matrix4::from_fn(|r, c| rows[r][c]))
    }
}

/// Ring layout of the turntable cameras.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TurntableLayout {
    /// Azimuth step on the equator, degrees.
    pub equator_step_deg: f64,
    /// Elevation of the upper ring (the lower ring mirrors it), degrees.
    pub ring_elevation_deg: f64,
    /// Azimuth step on the upper and lower rings, degrees.
    pub ring_step_deg: f64,
    pub fov_deg: f64,
}

impl Default for TurntableLayout {
    fn default() -> Self {
        TurntableLayout {
            equator_step_deg: 10.0,
            ring_elevation_deg: 30.0,
            ring_step_deg: 30.0,
            fov_deg: 45.0,
        }
    }
}

/// The default 60-view layout: 36 equator views 10 degrees apart plus 12
/// views each at +30 and -30 degrees elevation, 30 degrees apart.
pub fn sample_turntable_views(center: &Point3, radius: f64, resolution: [u32; 2]) -> Result<Vec<Camera>> {
    sample_views(center, radius, resolution, &TurntableLayout::default())
}

pub fn sample_views(
    center: &Point3,
    radius: f64,
    resolution: [u32; 2],
    layout: &TurntableLayout,
) -> Result<Vec<Camera>> {
    if !(radius > 0.0) {
        return Err(Error::invalid("turntable radius must be positive"));
    }
    if !(layout.equator_step_deg > 0.0 && layout.ring_step_deg > 0.0) {
        return Err(Error::invalid("azimuth steps must be positive"));
    }
    let proj = Projection::Perspective {
        fov: layout.fov_deg.to_radians(),
    };
    let mut rings = vec![(0.0, layout.equator_step_deg)];
    if layout.ring_elevation_deg != 0.0 {
        rings.push((layout.ring_elevation_deg, layout.ring_step_deg));
        rings.push((-layout.ring_elevation_deg, layout.ring_step_deg));
    }
    let mut cams = Vec::new();
    for (elev, step) in rings {
        let count = (360.0 / step).round() as usize;
        let el = f64::to_radians(elev);
        for k in 0..count {
            let az = (k as f64 * step).to_radians();
            let dir = Vec3::new(el.cos() * az.sin(), el.sin(), el.cos() * az.cos());
            let eye = center + dir * radius;
            cams.push(Camera::look_at(proj, &eye, center, &Vec3::y(), resolution)?);
        }
    }
    Ok(cams)
}
