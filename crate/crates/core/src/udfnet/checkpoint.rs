//! Binary model checkpoints and loss-history CSV.
//!
//! Layout (little-endian): 8-byte magic, u32 version, u32 N, u32 width
//! count, the widths as u32, f64 δ, then for every layer its weights
//! (row-major, `out x in`) followed by its biases, all as f32.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::encoding::encoded_width;
use super::mlp::{Dense, MlpUdf};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"LCLOTHUD";
const VERSION: u32 = 1;

pub fn save_checkpoint(path: impl AsRef<Path>, model: &MlpUdf) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_model(&mut w, model)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn write_model(w: &mut impl Write, model: &MlpUdf) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(model.pe_count() as u32).to_le_bytes())?;
    let widths = model.widths();
    w.write_all(&(widths.len() as u32).to_le_bytes())?;
    for width in &widths {
        w.write_all(&(*width as u32).to_le_bytes())?;
    }
    w.write_all(&model.delta().to_le_bytes())?;
    for layer in model.layers() {
        for &v in layer.weight.iter().chain(layer.bias.iter()) {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MlpUdf> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let bad = |msg: &str| Error::format(path, 0, msg.to_string());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
    if &magic != MAGIC {
        return Err(bad("not a model checkpoint (bad magic)"));
    }
    let version = read_u32(&mut r).ok_or_else(|| bad("truncated header"))?;
    if version != VERSION {
        return Err(bad(&format!("unsupported checkpoint version {version}")));
    }
    let pe_count = read_u32(&mut r).ok_or_else(|| bad("truncated header"))? as usize;
    let n_widths = read_u32(&mut r).ok_or_else(|| bad("truncated header"))? as usize;
    if !(2..=64).contains(&n_widths) {
        return Err(bad("implausible layer count"));
    }
    let widths: Vec<usize> = (0..n_widths)
        .map(|_| read_u32(&mut r).map(|w| w as usize))
        .collect::<Option<_>>()
        .ok_or_else(|| bad("truncated header"))?;
    if widths[0] != encoded_width(pe_count) {
        return Err(bad("input width does not match the encoding count"));
    }
    let mut d = [0u8; 8];
    r.read_exact(&mut d).map_err(|_| bad("truncated header"))?;
    let delta = f64::from_le_bytes(d);
    let mut layers = Vec::with_capacity(n_widths - 1);
    for pair in widths.windows(2) {
        let (inputs, outputs) = (pair[0], pair[1]);
        let weights = read_f32s(&mut r, inputs * outputs).ok_or_else(|| bad("truncated weights"))?;
        let bias = read_f32s(&mut r, outputs).ok_or_else(|| bad("truncated weights"))?;
        layers.push(Dense {
            weight: Array2::from_shape_vec((outputs, inputs), weights).expect("shape matches length"),
            bias: Array1::from(bias),
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::io(path, e))? != 0 {
        return Err(bad("trailing bytes after the last layer"));
    }
    MlpUdf::from_layers(pe_count, delta, layers).map_err(|e| bad(&e.to_string()))
}

/// The model as it will be after a save/load cycle (parameters rounded to
/// f32). Downstream stages use this so resumed runs match fresh ones.
pub fn quantized(model: &MlpUdf) -> MlpUdf {
    let mut out = model.clone();
    for layer in out.layers_mut() {
        layer
            .weight
            .iter_mut()
            .chain(layer.bias.iter_mut())
            .for_each(|v| *v = *v as f32 as f64);
    }
    out
}

pub fn save_loss_csv(path: impl AsRef<Path>, history: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    (|| {
        writeln!(w, "step,loss")?;
        for (i, l) in history.iter().enumerate() {
            writeln!(w, "{i},{l:e}")?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

fn read_u32(r: &mut impl Read) -> Option<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).ok()?;
    Some(u32::from_le_bytes(b))
}

fn read_f32s(r: &mut impl Read, n: usize) -> Option<Vec<f64>> {
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes).ok()?;
    Some(
        bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_equals_quantized_model() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.udf");
        let model = MlpUdf::new(2, &[8, 16], 0.01, 5).unwrap();
        save_checkpoint(&path, &model).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, quantized(&model));
        assert_eq!(back.widths(), vec![15, 8, 16, 1]);
        // Saving the loaded model reproduces the file byte for byte.
        let again = dir.path().join("again.udf");
        save_checkpoint(&again, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.udf");
        save_checkpoint(&path, &MlpUdf::new(1, &[4], 0.01, 0).unwrap()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format { .. })));
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        std::fs::write(&path, &wrong).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn loss_csv_has_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loss.csv");
        save_loss_csv(&path, &[0.5, 0.25]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().collect::<Vec<_>>(), vec!["step,loss", "0,5e-1", "1,2.5e-1"]);
    }
}
