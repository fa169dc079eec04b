use ndarray::Array1;

use super::encoding::encode_batch;
use super::mlp::{Gradients, MlpUdf};
use crate::error::{Error, Result};
use crate::geometry::Point3;

/// Clamped squared-error objective: mean of `(min(f, δ) - min(gt, δ))^2`.
///
/// Gradients are exact for the computational graph: the clamp contributes
/// zero gradient wherever it is active (`f >= δ`), and the raw network
/// output is used (no non-negativity guard during training).
pub fn udf_loss(
    model: &MlpUdf,
    points: &[Point3],
    gt: &[f64],
    delta: f64,
) -> Result<(f64, Gradients)> {
    if points.is_empty() {
        return Err(Error::invalid("loss needs a non-empty batch"));
    }
    if points.len() != gt.len() {
        return Err(Error::invalid(format!(
            "{} points but {} ground-truth distances",
            points.len(),
            gt.len()
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("loss clamp must be positive, got {delta}")));
    }
    let encoded = encode_batch(points, model.pe_count());
    let (pred, trace) = model.forward_traced(encoded);
    let n = points.len() as f64;
    let mut loss = 0.0;
    let mut d_out = Array1::zeros(points.len());
    for (i, (&f, &g)) in pred.iter().zip(gt).enumerate() {
        let diff = clamp_top(f, delta) - clamp_top(g, delta);
        loss += diff * diff;
        if f < delta {
            d_out[i] = 2.0 * diff / n;
        }
    }
    Ok((loss / n, model.backward(&trace, d_out)))
}

/// `min(v, delta)` that lets NaN through so divergence stays visible.
fn clamp_top(v: f64, delta: f64) -> f64 {
    if v.is_nan() {
        v
    } else {
        v.min(delta)
    }
}

/// Loss value only, used by finite-difference checks and evaluation.
pub fn udf_loss_value(model: &MlpUdf, points: &[Point3], gt: &[f64], delta: f64) -> f64 {
    let pred = model.raw_batch(points);
    let sum: f64 = pred
        .iter()
        .zip(gt)
        .map(|(&f, &g)| {
            let d = clamp_top(f, delta) - clamp_top(g, delta);
            d * d
        })
        .sum();
    sum / points.len() as f64
}
