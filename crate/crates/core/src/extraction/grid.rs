use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Aabb, Point3};
use crate::udfnet::MlpUdf;

const GRID_MAGIC: &[u8; 8] = b"LCLOTHGR";
/// Points per model evaluation batch while baking.
const BAKE_CHUNK: usize = 4096;

/// Scalar samples on a regular grid of cubic cells. Node `(i, j, k)` sits at
/// `origin + cell * (i, j, k)`; `i` varies fastest in `values`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub origin: Point3,
    pub cell: f64,
    pub dims: [usize; 3],
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(origin: Point3, cell: f64, dims: [usize; 3], values: Vec<f64>) -> Result<Self> {
        if dims.iter().any(|&d| d < 2) {
            return Err(Error::invalid(format!("grid needs at least 2 nodes per axis, got {dims:?}")));
        }
        if !(cell > 0.0 && cell.is_finite()) {
            return Err(Error::invalid(format!("grid cell size must be positive, got {cell}")));
        }
        if values.len() != dims[0] * dims[1] * dims[2] {
            return Err(Error::invalid(format!(
                "grid {dims:?} needs {} values, got {}",
                dims[0] * dims[1] * dims[2],
                values.len()
            )));
        }
        Ok(ScalarGrid {
            origin,
            cell,
            dims,
            values,
        })
    }

    /// Grid covering `bounds` with `resolution` cells along its longest
    /// side; other axes get as many cells as needed to cover them.
    pub fn layout(bounds: &Aabb, resolution: usize) -> Result<(Point3, f64, [usize; 3])> {
        if resolution < 2 {
            return Err(Error::invalid(format!("grid resolution must be at least 2, got {resolution}")));
        }
        if bounds.is_empty() {
            return Err(Error::invalid("cannot lay a grid over empty bounds"));
        }
        let ext = bounds.extent();
        let longest = ext.max();
        if !(longest > 0.0 && longest.is_finite()) {
            return Err(Error::invalid("grid bounds must have a positive finite extent"));
        }
        let cell = longest / resolution as f64;
        let dims = [0, 1, 2].map(|a| ((ext[a] / cell).ceil() as usize).clamp(1, resolution) + 1);
        Ok((bounds.min, cell, dims))
    }

    pub fn node_count(&self) -> usize {
        self.values.len()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> Point3 {
        self.origin + nalgebra::Vector3::new(i as f64, j as f64, k as f64) * self.cell
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    fn node_of(&self, index: usize) -> Point3 {
        let i = index % self.dims[0];
        let j = (index / self.dims[0]) % self.dims[1];
        let k = index / (self.dims[0] * self.dims[1]);
        self.node(i, j, k)
    }

    /// Trilinear interpolation; `p` is clamped into the grid.
    pub fn interpolate(&self, p: &Point3) -> f64 {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let u = ((p[a] - self.origin[a]) / self.cell).clamp(0.0, (self.dims[a] - 1) as f64);
            let b = (u.floor() as usize).min(self.dims[a] - 2);
            base[a] = b;
            frac[a] = u - b as f64;
        }
        let mut acc = 0.0;
        for c in 0..8 {
            let o = [c & 1, (c >> 1) & 1, (c >> 2) & 1];
            let w: f64 = (0..3).map(|a| if o[a] == 1 { frac[a] } else { 1.0 - frac[a] }).product();
            acc += w * self.value(base[0] + o[0], base[1] + o[1], base[2] + o[2]);
        }
        acc
    }

    /// `(min, max)` over all nodes.
    pub fn value_range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Debug dump: magic, origin (3 x f64), cell (f64), dims (3 x u32), then
    /// one f32 per node, all little-endian.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::with_capacity(48 + 4 * self.values.len());
        buf.extend_from_slice(GRID_MAGIC);
        for a in 0..3 {
            buf.extend_from_slice(&self.origin[a].to_le_bytes());
        }
        buf.extend_from_slice(&self.cell.to_le_bytes());
        for d in self.dims {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.values {
            buf.extend_from_slice(&(*v as f32).to_le_bytes());
        }
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    /// Reads a dump written by [`ScalarGrid::save`]; values come back as
    /// the stored f32.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let bad = |msg: &str| Error::format(path, 0, msg);
        if bytes.len() < 52 || &bytes[..8] != GRID_MAGIC {
            return Err(bad("not a grid dump"));
        }
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let origin = Point3::new(f64_at(8), f64_at(16), f64_at(24));
        let cell = f64_at(32);
        let dims = [u32_at(40), u32_at(44), u32_at(48)];
        let count = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| bad("grid too large"))?;
        if bytes.len() != 52 + 4 * count {
            return Err(bad("grid dump length does not match its dimensions"));
        }
        let values = bytes[52..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        ScalarGrid::new(origin, cell, dims, values)
    }
}

/// Samples `field` at every node of the grid laid over `bounds`.
pub fn bake_grid<F>(field: F, bounds: &Aabb, resolution: usize) -> Result<ScalarGrid>
where
    F: Fn(&Point3) -> f64 + Sync,
{
    let (origin, cell, dims) = ScalarGrid::layout(bounds, resolution)?;
    let mut grid = ScalarGrid::new(origin, cell, dims, vec![0.0; dims[0] * dims[1] * dims[2]])?;
    let values: Vec<f64> = (0..grid.node_count())
        .into_par_iter()
        .map(|n| field(&grid.node_of(n)))
        .collect();
    grid.values = values;
    Ok(grid)
}

/// [`bake_grid`] for a trained distance network, evaluated in batches.
pub fn bake_model_grid(model: &MlpUdf, bounds: &Aabb, resolution: usize) -> Result<ScalarGrid> {
    let (origin, cell, dims) = ScalarGrid::layout(bounds, resolution)?;
    let mut grid = ScalarGrid::new(origin, cell, dims, vec![0.0; dims[0] * dims[1] * dims[2]])?;
    let n = grid.node_count();
    let chunks: Vec<Vec<f64>> = (0..n.div_ceil(BAKE_CHUNK))
        .into_par_iter()
        .map(|c| {
            let pts: Vec<Point3> = (c * BAKE_CHUNK..((c + 1) * BAKE_CHUNK).min(n)).map(|i| grid.node_of(i)).collect();
            model.eval_batch(&pts)
        })
        .collect();
    grid.values = chunks.concat();
    Ok(grid)
}
