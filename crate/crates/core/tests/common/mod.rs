#![allow(dead_code)]

use layercloth::pipeline::{MetricParams, Params, TrainParams};
use layercloth::udfnet::SampleCounts;

/// Parameters small enough for a full run in a few seconds.
pub fn quick_params() -> Params {
    Params {
        hidden: vec![64, 64],
        pe_count: 2,
        grid_resolution: 128,
        sampling: SampleCounts {
            on_surface: 3000,
            near_surface: 3000,
            in_box: 1500,
            sigma: 0.01,
        },
        train: TrainParams {
            learning_rate: 1e-3,
            iterations: 1000,
            batch_size: 512,
            ..TrainParams::default()
        },
        metrics: MetricParams {
            samples: 4000,
            resolution: 128,
        },
        ..Params::default()
    }
}
