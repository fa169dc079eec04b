//! Manifest-driven reconstruction runs: label transfer, canonicalization,
//! penetration removal, distance-field fitting, surface extraction and
//! evaluation, each stage persisting its artifacts so runs can resume.

mod fixture;
mod manifest;
mod run;

pub use fixture::{reference_garment, write_fixture, FixtureOptions, MaskOptions};
pub use manifest::{
    validate_manifest, BodyFiles, LabelSource, LayerEntry, Manifest, ManifestIssue, MetricParams,
    OrientationParams, Params, TrainParams, MANIFEST_SCHEMA_VERSION,
};
pub use run::{
    artifacts, derive_seed, run_pipeline, LayerSummary, RunRecord, Stage, StageRange, StageRecord,
};
