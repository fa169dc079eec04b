use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::udf_loss;
use super::mlp::{Gradients, MlpUdf};
use super::sampling::SampleSet;
use crate::error::{Error, Result};
use crate::geometry::Point3;

/// Adam hyperparameters and the mini-batch schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 4096,
            iterations: 20_000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::invalid("Adam betas must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// First and second moment estimates for Adam.
struct Adam {
    m: Gradients,
    v: Gradients,
    step: i32,
}

impl Adam {
    fn new(model: &MlpUdf) -> Self {
        Adam {
            m: Gradients::zeros_like(model),
            v: Gradients::zeros_like(model),
            step: 0,
        }
    }

    fn update(&mut self, model: &mut MlpUdf, grads: &Gradients, cfg: &TrainConfig) {
        self.step += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let lr = cfg.learning_rate;
        let eps = cfg.eps;
        let layers = model.layers_mut();
        for (l, layer) in layers.iter_mut().enumerate() {
            let g = &grads.layers[l];
            let m = &mut self.m.layers[l];
            let v = &mut self.v.layers[l];
            let params = layer.weight.iter_mut().chain(layer.bias.iter_mut());
            let gs = g.weight.iter().chain(g.bias.iter());
            let ms = m.weight.iter_mut().chain(m.bias.iter_mut());
            let vs = v.weight.iter_mut().chain(v.bias.iter_mut());
            for (((p, &g), m), v) in params.zip(gs).zip(ms).zip(vs) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let mhat = *m / c1;
                let vhat = *v / c2;
                *p -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

/// A fitted network together with the per-step training loss.
#[derive(Debug, Clone)]
pub struct TrainedUdf {
    pub model: MlpUdf,
    pub loss_history: Vec<f64>,
}

/// Runs `config.iterations` Adam steps over seeded, shuffled mini-batches.
/// Each recorded loss is the batch loss before that step's update.
pub fn train_udf(model: MlpUdf, samples: &SampleSet, config: &TrainConfig) -> Result<TrainedUdf> {
    train_udf_with(model, samples, config, |_, _| {})
}

/// Like [`train_udf`], calling `progress(step, loss)` after every step.
pub fn train_udf_with(
    mut model: MlpUdf,
    samples: &SampleSet,
    config: &TrainConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<TrainedUdf> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid("training needs at least one sample"));
    }
    let n = samples.len();
    let batch = config.batch_size.min(n);
    let delta = model.delta();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut cursor = 0;
    let mut adam = Adam::new(&model);
    let mut history = Vec::with_capacity(config.iterations);
    let mut points: Vec<Point3> = Vec::with_capacity(batch);
    let mut gt: Vec<f64> = Vec::with_capacity(batch);

    for step in 0..config.iterations {
        points.clear();
        gt.clear();
        while points.len() < batch {
            if cursor == n {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let i = order[cursor];
            cursor += 1;
            points.push(samples.points[i]);
            gt.push(samples.gt[i]);
        }
        let (loss, grads) = udf_loss(&model, &points, &gt, delta)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { step, loss });
        }
        adam.update(&mut model, &grads, config);
        history.push(loss);
        progress(step, loss);
    }
    Ok(TrainedUdf {
        model,
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::udfnet::sampling::SampleCategory;

    fn sphere_samples(n: usize) -> SampleSet {
        let mut set = SampleSet::default();
        for i in 0..n {
            let t = i as f64 / n as f64;
            let p = Point3::new(
                0.4 * (t * 17.0).sin(),
                0.4 * (t * 11.0).cos(),
                0.4 * (t * 5.0).sin(),
            );
            set.push(p, (p.coords.norm() - 0.3).abs(), SampleCategory::Box);
        }
        set
    }

    #[test]
    fn zero_iterations_leave_model_unchanged() {
        let model = MlpUdf::new(2, &[8, 8], 0.01, 4).unwrap();
        let cfg = TrainConfig {
            iterations: 0,
            ..TrainConfig::default()
        };
        let out = train_udf(model.clone(), &sphere_samples(32), &cfg).unwrap();
        assert_eq!(out.model, model);
        assert!(out.loss_history.is_empty());
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let samples = sphere_samples(200);
        let cfg = TrainConfig {
            iterations: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 11,
            ..TrainConfig::default()
        };
        let a = train_udf(MlpUdf::new(2, &[16, 16], 0.05, 1).unwrap(), &samples, &cfg).unwrap();
        let b = train_udf(MlpUdf::new(2, &[16, 16], 0.05, 1).unwrap(), &samples, &cfg).unwrap();
        assert_eq!(a.loss_history, b.loss_history);
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn loss_decreases_on_simple_fit() {
        let samples = sphere_samples(256);
        let cfg = TrainConfig {
            iterations: 300,
            batch_size: 256,
            learning_rate: 1e-3,
            ..TrainConfig::default()
        };
        let out = train_udf(MlpUdf::new(2, &[32, 32], 0.2, 3).unwrap(), &samples, &cfg).unwrap();
        let first = out.loss_history[0];
        let last = *out.loss_history.last().unwrap();
        assert!(last < 0.1 * first, "{first} -> {last}");
    }

    #[test]
    fn divergence_is_reported() {
        let mut samples = sphere_samples(8);
        samples.gt[3] = f64::NAN;
        let cfg = TrainConfig {
            iterations: 5,
            batch_size: 8,
            ..TrainConfig::default()
        };
        let err = train_udf(MlpUdf::new(1, &[4], 0.01, 0).unwrap(), &samples, &cfg).unwrap_err();
        assert!(matches!(err, Error::Divergence { step: 0, .. }));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(train_udf(MlpUdf::with_defaults(0), &sphere_samples(4), &cfg).is_err());
    }
}
