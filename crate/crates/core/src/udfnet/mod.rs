//! Neural unsigned distance fields: positional encoding, a small MLP with
//! hand-written backpropagation, the clamped fitting loss, Adam training,
//! the three-category point sampler and checkpoint I/O.

mod checkpoint;
mod encoding;
mod loss;
mod mlp;
mod sampling;
mod train;

pub use checkpoint::{load_checkpoint, quantized, save_checkpoint, save_loss_csv};
pub use encoding::{encode_batch, encoded_width, positional_encode};
pub use loss::{udf_loss, udf_loss_value};
pub use mlp::{Dense, Gradients, MlpUdf, DEFAULT_DELTA, DEFAULT_HIDDEN, DEFAULT_PE_COUNT};
pub(crate) use sampling::AreaSampler;
pub use sampling::{sample_training_points, SampleCategory, SampleCounts, SampleSet};
pub use train::{train_udf, train_udf_with, TrainConfig, TrainedUdf};

use crate::geometry::Point3;

/// Predicted unsigned distance at `x`: `max(raw output, 0)`.
pub fn udf_eval(model: &MlpUdf, x: &Point3) -> f64 {
    model.eval_batch(std::slice::from_ref(x))[0]
}
