//! Weights file: u32 vertex count, u32 joint count, then row-major f32
//! weights (little-endian). Pose file: JSON array of row-major 4x4 matrices.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Matrix4;

use super::{Pose, WeightField};
use crate::error::{Error, Result};

/// Stored rows may drift from 1 by f32 rounding; rows within this of 1 are
/// renormalized on load, anything further is rejected.
const LOAD_SUM_TOL: f64 = 1e-4;

pub fn save_weights(path: impl AsRef<Path>, weights: &WeightField) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    (|| {
        w.write_all(&(weights.len() as u32).to_le_bytes())?;
        w.write_all(&(weights.joint_count() as u32).to_le_bytes())?;
        for &v in weights.as_slice() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightField> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    BufReader::new(file)
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 {
        return Err(Error::format(path, 0, "weights header truncated"));
    }
    let n = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let j = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if j == 0 {
        return Err(Error::format(path, 0, "weights file declares zero joints"));
    }
    let expected = n
        .checked_mul(j)
        .and_then(|c| c.checked_mul(4))
        .and_then(|c| c.checked_add(8));
    if expected != Some(bytes.len()) {
        return Err(Error::format(
            path,
            0,
            format!("weights file holds {} bytes, header implies {n} x {j} floats", bytes.len()),
        ));
    }
    let mut data: Vec<f64> = bytes[8..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    for (i, row) in data.chunks_exact_mut(j).enumerate() {
        let sum: f64 = row.iter().sum();
        if row.iter().any(|w| !(*w >= 0.0)) || (sum - 1.0).abs() > LOAD_SUM_TOL {
            return Err(Error::format(path, 0, format!("vertex {i} weights are not a convex combination")));
        }
        row.iter_mut().for_each(|w| *w /= sum);
    }
    WeightField::new(j, data).map_err(|e| Error::format(path, 0, e.to_string()))
}

pub fn save_pose(path: impl AsRef<Path>, pose: &Pose) -> Result<()> {
    let path = path.as_ref();
    let rows: Vec<[[f64; 4]; 4]> = pose
        .transforms()
        .iter()
        .map(|m| std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)])))
        .collect();
    let text = serde_json::to_string_pretty(&rows)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_pose(path: impl AsRef<Path>) -> Result<Pose> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let rows: Vec<[[f64; 4]; 4]> = serde_json::from_str(&text).map_err(|e| {
        Error::format(path, e.line(), format!("expected an array of 4x4 matrices: {e}"))
    })?;
    let mats = rows
        .iter()
        .map(|m| Matrix4::from_fn(|r, c| m[r][c]))
        .collect();
    Pose::new(mats).map_err(|e| Error::format(path, 0, e.to_string()))
}
