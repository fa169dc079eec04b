use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::encoding::{encode_batch, encoded_width};
use crate::error::{Error, Result};
use crate::geometry::Point3;

/// Hidden layer widths of the garment distance network.
pub const DEFAULT_HIDDEN: [usize; 4] = [128, 256, 256, 128];
/// Number of positional-encoding frequency bands.
pub const DEFAULT_PE_COUNT: usize = 4;
/// Loss clamp, meters.
pub const DEFAULT_DELTA: f64 = 0.010;

/// One fully connected layer, `weight` is `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            weight: Array2::zeros((outputs, inputs)),
            bias: Array1::zeros(outputs),
        }
    }

    fn inputs(&self) -> usize {
        self.weight.ncols()
    }

    fn outputs(&self) -> usize {
        self.weight.nrows()
    }

    fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// A multilayer perceptron mapping a positionally encoded point to an
/// unsigned distance. Hidden layers use ReLU, the output is linear.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpUdf {
    pe_count: usize,
    delta: f64,
    layers: Vec<Dense>,
}

/// Activations recorded during a forward pass, consumed by backprop.
pub(crate) struct Trace {
    /// Input to every layer (encoded points first, then post-ReLU activations).
    inputs: Vec<Array2<f64>>,
    /// Pre-activation of every hidden layer.
    pre: Vec<Array2<f64>>,
}

impl MlpUdf {
    /// Builds a network with uniform `±sqrt(1/fan_in)` initialization.
    pub fn new(pe_count: usize, hidden: &[usize], delta: f64, seed: u64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::invalid(format!("loss clamp must be positive, got {delta}")));
        }
        if hidden.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let widths = Self::layer_widths(pe_count, hidden);
        let layers = widths
            .windows(2)
            .map(|w| {
                let bound = (1.0 / w[0] as f64).sqrt();
                let mut layer = Dense::zeros(w[0], w[1]);
                layer
                    .weight
                    .iter_mut()
                    .chain(layer.bias.iter_mut())
                    .for_each(|p| *p = rng.random_range(-bound..bound));
                layer
            })
            .collect();
        Ok(MlpUdf {
            pe_count,
            delta,
            layers,
        })
    }

    /// Default widths, encoding count and clamp, ready for fitting (output
    /// layer zeroed, see [`MlpUdf::zero_output_layer`]).
    pub fn with_defaults(seed: u64) -> Self {
        let mut m = Self::new(DEFAULT_PE_COUNT, &DEFAULT_HIDDEN, DEFAULT_DELTA, seed)
            .expect("default configuration is valid");
        m.zero_output_layer();
        m
    }

    /// Rebuilds a network from explicit layers; shapes must chain and the
    /// first layer must accept `3 + 6 * pe_count` inputs.
    pub fn from_layers(pe_count: usize, delta: f64, layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("network needs at least one layer"));
        }
        if !(delta > 0.0) {
            return Err(Error::invalid(format!("loss clamp must be positive, got {delta}")));
        }
        if layers[0].inputs() != encoded_width(pe_count) {
            return Err(Error::invalid(format!(
                "first layer takes {} inputs, encoding produces {}",
                layers[0].inputs(),
                encoded_width(pe_count)
            )));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::invalid(format!(
                    "layer {i} emits {} values but layer {} takes {}",
                    pair[0].outputs(),
                    i + 1,
                    pair[1].inputs()
                )));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::invalid(format!("layer {i} bias length mismatch")));
            }
        }
        if layers.last().unwrap().outputs() != 1 {
            return Err(Error::invalid("output layer must have width 1"));
        }
        Ok(MlpUdf {
            pe_count,
            delta,
            layers,
        })
    }

    fn layer_widths(pe_count: usize, hidden: &[usize]) -> Vec<usize> {
        let mut widths = vec![encoded_width(pe_count)];
        widths.extend_from_slice(hidden);
        widths.push(1);
        widths
    }

    /// `[input, hidden..., 1]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut widths = vec![self.layers[0].inputs()];
        widths.extend(self.layers.iter().map(Dense::outputs));
        widths
    }

    pub fn pe_count(&self) -> usize {
        self.pe_count
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    /// Zeros the output layer so the network predicts 0 everywhere.
    ///
    /// Fitting should start from here: with a random output layer most
    /// initial predictions exceed δ, where the clamped loss has no gradient,
    /// and training stalls.
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.last_mut().unwrap();
        last.weight.fill(0.0);
        last.bias.fill(0.0);
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Raw (unguarded) network output for a batch of encoded inputs.
    pub(crate) fn forward_encoded(&self, encoded: ArrayView2<f64>) -> Array1<f64> {
        let mut act = encoded.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = act.dot(&layer.weight.t());
            z += &layer.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            act = z;
        }
        act.index_axis_move(Axis(1), 0)
    }

    pub(crate) fn forward_traced(&self, encoded: Array2<f64>) -> (Array1<f64>, Trace) {
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut act = encoded;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = act.dot(&layer.weight.t());
            z += &layer.bias;
            inputs.push(act);
            if i < last {
                act = z.mapv(|v| v.max(0.0));
                pre.push(z);
            } else {
                act = z;
            }
        }
        (act.index_axis_move(Axis(1), 0), Trace { inputs, pre })
    }

    /// Backpropagates `d_out` (gradient w.r.t. each raw output) through a
    /// recorded forward pass.
    pub(crate) fn backward(&self, trace: &Trace, d_out: Array1<f64>) -> Gradients {
        let mut grads: Vec<Dense> = Vec::with_capacity(self.layers.len());
        let mut dz = d_out.insert_axis(Axis(1));
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let weight = dz.t().dot(&trace.inputs[l]);
            let bias = dz.sum_axis(Axis(0));
            if l > 0 {
                let mut da = dz.dot(&layer.weight);
                Zip::from(&mut da).and(&trace.pre[l - 1]).for_each(|g, &z| {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                });
                dz = da;
            }
            grads.push(Dense { weight, bias });
        }
        grads.reverse();
        Gradients { layers: grads }
    }

    /// Raw outputs (no non-negativity guard) for a batch of points.
    pub fn raw_batch(&self, points: &[Point3]) -> Vec<f64> {
        if points.is_empty() {
            return Vec::new();
        }
        self.forward_encoded(encode_batch(points, self.pe_count).view())
            .to_vec()
    }

    /// Distance predictions `max(raw, 0)` for a batch of points.
    pub fn eval_batch(&self, points: &[Point3]) -> Vec<f64> {
        let mut out = self.raw_batch(points);
        out.iter_mut().for_each(|v| *v = v.max(0.0));
        out
    }

    /// Read a parameter by flat index (layer order, weights row-major then bias).
    pub fn param(&self, index: usize) -> f64 {
        let (l, off) = self.locate(index);
        flat_get(&self.layers[l], off)
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let (l, off) = self.locate(index);
        flat_set(&mut self.layers[l], off, value);
    }

    fn locate(&self, mut index: usize) -> (usize, usize) {
        for (l, layer) in self.layers.iter().enumerate() {
            if index < layer.param_count() {
                return (l, index);
            }
            index -= layer.param_count();
        }
        panic!("parameter index out of range");
    }
}

fn flat_get(layer: &Dense, off: usize) -> f64 {
    let n = layer.weight.len();
    if off < n {
        layer.weight.as_slice().unwrap()[off]
    } else {
        layer.bias[off - n]
    }
}

fn flat_set(layer: &mut Dense, off: usize, value: f64) {
    let n = layer.weight.len();
    if off < n {
        layer.weight.as_slice_mut().unwrap()[off] = value;
    } else {
        layer.bias[off - n] = value;
    }
}

/// Parameter gradients with the same shapes as the network layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub(crate) fn zeros_like(model: &MlpUdf) -> Self {
        Gradients {
            layers: model
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs(), l.outputs()))
                .collect(),
        }
    }

    /// Gradient by flat parameter index, matching [`MlpUdf::param`].
    pub fn get(&self, mut index: usize) -> f64 {
        for layer in &self.layers {
            if index < layer.param_count() {
                return flat_get(layer, index);
            }
            index -= layer.param_count();
        }
        panic!("parameter index out of range");
    }

    pub fn is_zero(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|&g| g == 0.0))
    }
}
