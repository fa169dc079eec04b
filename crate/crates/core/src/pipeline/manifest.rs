use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::{DEFAULT_GRID_RESOLUTION, DEFAULT_TAU, DEFAULT_VIEW_DIR, DEFAULT_XI};
use crate::geometry::{io::load_labels, io::load_mesh, TriMesh};
use crate::layering::DEFAULT_EPSILON;
use crate::metrics::{DEFAULT_IR_RESOLUTION, DEFAULT_METRIC_SAMPLES};
use crate::rasterview::{load_cameras, LabelMask, DEFAULT_SMOOTHING_ITERS};
use crate::skinning::{load_pose, load_weights, Pose};
use crate::udfnet::{SampleCounts, TrainConfig, DEFAULT_DELTA, DEFAULT_HIDDEN, DEFAULT_PE_COUNT};

/// Manifest schema understood by this version.
pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// A reconstruction job: body, garment layers inner to outer, parameters.
/// Relative paths are resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub body: BodyFiles,
    /// Pose every layer is aligned to; the body's rest pose when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical_pose: Option<PathBuf>,
    pub layers: Vec<LayerEntry>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Directory relative paths are taken from; set when loading.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodyFiles {
    pub mesh: PathBuf,
    pub weights: PathBuf,
}

/// One captured garment layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerEntry {
    /// Full-body mesh of this capture, in its capture pose.
    pub mesh: PathBuf,
    /// Body pose of this capture.
    pub pose: PathBuf,
    pub labels: LabelSource,
    /// Label value marking this layer's garment vertices.
    pub garment_label: i32,
    /// Ground-truth garment in the canonical pose, for geometry metrics.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<PathBuf>,
}

/// Where per-vertex garment labels come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase", deny_unknown_fields)]
pub enum LabelSource {
    /// Labels stored in the layer mesh itself (PLY property or OBJ sidecar).
    Embedded,
    /// One integer per vertex in a separate file.
    File { path: PathBuf },
    /// Binary garment masks voted onto the mesh, one per camera.
    Masks { masks: Vec<PathBuf>, cameras: PathBuf },
}

/// Stage parameters; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Thickness kept between layers, meters.
    pub epsilon: f64,
    /// Distance clamp of the training loss, meters.
    pub delta: f64,
    /// Marching-cubes threshold, meters.
    pub tau: f64,
    pub pe_count: usize,
    pub hidden: Vec<usize>,
    /// Grid cells along the longest side of each garment's box.
    pub grid_resolution: usize,
    pub smoothing_iters: usize,
    pub sampling: SampleCounts,
    pub train: TrainParams,
    pub orientation: OrientationParams,
    pub metrics: MetricParams,
    /// Also write the baked grids of the extraction stage.
    pub dump_grids: bool,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            epsilon: DEFAULT_EPSILON,
            delta: DEFAULT_DELTA,
            tau: DEFAULT_TAU,
            pe_count: DEFAULT_PE_COUNT,
            hidden: DEFAULT_HIDDEN.to_vec(),
            grid_resolution: DEFAULT_GRID_RESOLUTION,
            smoothing_iters: DEFAULT_SMOOTHING_ITERS,
            sampling: SampleCounts::default(),
            train: TrainParams::default(),
            orientation: OrientationParams::default(),
            metrics: MetricParams::default(),
            dump_grids: false,
        }
    }
}

/// Optimizer settings; the shuffling seed is derived from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub iterations: usize,
}

impl Default for TrainParams {
    fn default() -> Self {
        let c = TrainConfig::default();
        TrainParams {
            learning_rate: c.learning_rate,
            beta1: c.beta1,
            beta2: c.beta2,
            eps: c.eps,
            batch_size: c.batch_size,
            iterations: c.iterations,
        }
    }
}

impl TrainParams {
    pub fn config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            batch_size: self.batch_size,
            iterations: self.iterations,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrientationParams {
    pub view_dir: [f64; 3],
    pub xi: f64,
}

impl Default for OrientationParams {
    fn default() -> Self {
        OrientationParams {
            view_dir: DEFAULT_VIEW_DIR,
            xi: DEFAULT_XI,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricParams {
    /// Surface samples per side for Chamfer distance and normal consistency.
    pub samples: usize,
    /// Side length of the intersection-ratio renders, pixels.
    pub resolution: u32,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            samples: DEFAULT_METRIC_SAMPLES,
            resolution: DEFAULT_IR_RESOLUTION,
        }
    }
}

impl Params {
    fn check(&self, issues: &mut Issues) {
        let mut positive = |name: &str, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                issues.push(format!("params.{name}"), format!("must be a positive number, got {v}"));
            }
        };
        positive("epsilon", self.epsilon);
        positive("delta", self.delta);
        positive("tau", self.tau);
        positive("train.learning_rate", self.train.learning_rate);
        positive("sampling.sigma", self.sampling.sigma);
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            issues.push("params.hidden", "needs at least one layer, all widths positive");
        }
        if self.grid_resolution < 5 {
            issues.push("params.grid_resolution", "must be at least 5");
        }
        if self.train.batch_size == 0 {
            issues.push("params.train.batch_size", "must be at least 1");
        }
        if !(0.0..1.0).contains(&self.train.beta1) || !(0.0..1.0).contains(&self.train.beta2) {
            issues.push("params.train", "Adam betas must lie in [0, 1)");
        }
        if self.sampling.on_surface == 0 {
            issues.push("params.sampling.on_surface", "must be at least 1");
        }
        let d = self.orientation.view_dir;
        if !(d.iter().all(|x| x.is_finite()) && d.iter().any(|&x| x != 0.0)) {
            issues.push("params.orientation.view_dir", "must be a finite non-zero vector");
        }
        if !self.orientation.xi.is_finite() {
            issues.push("params.orientation.xi", "must be finite");
        }
        if self.metrics.samples == 0 || self.metrics.resolution == 0 {
            issues.push("params.metrics", "samples and resolution must be positive");
        }
    }
}

/// One problem found while validating a manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestIssue {
    /// Where in the manifest, e.g. `layers[1].pose`.
    pub location: String,
    pub message: String,
}

impl fmt::Display for ManifestIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.location, self.message)
    }
}

#[derive(Default)]
struct Issues(Vec<ManifestIssue>);

impl Issues {
    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.0.push(ManifestIssue {
            location: location.into(),
            message: message.into(),
        });
    }
}

impl Manifest {
    /// Parses a manifest without touching the files it references.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::format(path, e.line(), e.to_string()))?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output_dir)
    }

    /// Reads every referenced file and checks cross-references, collecting
    /// all problems instead of stopping at the first.
    pub fn check(&self) -> Result<()> {
        let mut issues = Issues::default();
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            issues.push(
                "schema_version",
                format!("unsupported version {}, expected {MANIFEST_SCHEMA_VERSION}", self.schema_version),
            );
        }
        if self.layers.is_empty() {
            issues.push("layers", "at least one layer is required");
        }
        self.params.check(&mut issues);

        let body = self.read("body.mesh", &self.body.mesh, &mut issues, load_mesh);
        let weights = self.read("body.weights", &self.body.weights, &mut issues, load_weights);
        if let (Some(b), Some(w)) = (&body, &weights) {
            if w.len() != b.vertex_count() {
                issues.push(
                    "body.weights",
                    format!("{} weight rows for {} body vertices", w.len(), b.vertex_count()),
                );
            }
        }
        let joints = weights.as_ref().map(|w| w.joint_count());
        let pose_joints = |loc: &str, pose: &Pose, issues: &mut Issues| {
            if let Some(j) = joints {
                if pose.joint_count() != j {
                    issues.push(loc, format!("pose has {} joints, weights have {j}", pose.joint_count()));
                }
            }
        };
        if let Some(p) = &self.canonical_pose {
            if let Some(pose) = self.read("canonical_pose", p, &mut issues, load_pose) {
                pose_joints("canonical_pose", &pose, &mut issues);
            }
        }

        for (k, layer) in self.layers.iter().enumerate() {
            let at = |field: &str| format!("layers[{k}].{field}");
            let name = format!("layer {}", k + 1);
            let mesh = self.read(&at("mesh"), &layer.mesh, &mut issues, load_mesh);
            if let Some(pose) = self.read(&at("pose"), &layer.pose, &mut issues, load_pose) {
                pose_joints(&at("pose"), &pose, &mut issues);
            }
            if layer.garment_label == 0 {
                issues.push(at("garment_label"), format!("{name}: label 0 means not garment"));
            }
            let labels: Option<Vec<i32>> = match &layer.labels {
                LabelSource::Embedded => mesh.as_ref().and_then(|m| {
                    let l = m.labels().map(<[i32]>::to_vec);
                    if l.is_none() {
                        issues.push(at("labels"), format!("{name}: mesh carries no embedded labels"));
                    }
                    l
                }),
                LabelSource::File { path } => self.read(&at("labels.path"), path, &mut issues, load_labels),
                LabelSource::Masks { masks, cameras } => {
                    self.check_masks(k, masks, cameras, &mut issues);
                    None
                }
            };
            if let (Some(m), Some(l)) = (&mesh, &labels) {
                if l.len() != m.vertex_count() {
                    issues.push(
                        at("labels"),
                        format!("{name}: {} labels for {} vertices", l.len(), m.vertex_count()),
                    );
                } else if !l.contains(&layer.garment_label) {
                    issues.push(
                        at("garment_label"),
                        format!("{name}: no vertex carries label {}", layer.garment_label),
                    );
                }
            }
            if let Some(r) = &layer.reference {
                self.read(&at("reference"), r, &mut issues, load_mesh);
            }
        }
        if issues.0.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidManifest { issues: issues.0 })
        }
    }

    fn check_masks(&self, k: usize, masks: &[PathBuf], cameras: &Path, issues: &mut Issues) {
        let at = |field: &str| format!("layers[{k}].labels.{field}");
        let cams = self.read(&at("cameras"), cameras, issues, load_cameras);
        if masks.is_empty() {
            issues.push(at("masks"), format!("layer {}: no masks given", k + 1));
        }
        if let Some(c) = &cams {
            if c.len() != masks.len() {
                issues.push(at("masks"), format!("{} masks for {} cameras", masks.len(), c.len()));
            }
        }
        for (i, m) in masks.iter().enumerate() {
            let loc = format!("layers[{k}].labels.masks[{i}]");
            if let Some(mask) = self.read(&loc, m, issues, LabelMask::load) {
                if let Some(cam) = cams.as_ref().and_then(|c| c.get(i)) {
                    if (mask.width, mask.height) != (cam.width(), cam.height()) {
                        issues.push(
                            loc,
                            format!(
                                "mask is {}x{}, camera renders {}x{}",
                                mask.width,
                                mask.height,
                                cam.width(),
                                cam.height()
                            ),
                        );
                    }
                }
            }
        }
    }

    fn read<T>(&self, location: &str, path: &Path, issues: &mut Issues, load: impl Fn(PathBuf) -> Result<T>) -> Option<T> {
        let full = self.resolve(path);
        if !full.is_file() {
            issues.push(location, format!("file not found: {}", full.display()));
            return None;
        }
        match load(full) {
            Ok(v) => Some(v),
            Err(e) => {
                issues.push(location, e.to_string());
                None
            }
        }
    }
}

/// Loads and fully checks a manifest.
pub fn validate_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let m = Manifest::load(path)?;
    m.check()?;
    Ok(m)
}

/// Labels of a layer mesh as its manifest entry describes them, before any
/// voting (`None` for mask sources).
pub(crate) fn direct_labels(manifest: &Manifest, layer: &LayerEntry, mesh: &TriMesh) -> Result<Option<Vec<i32>>> {
    match &layer.labels {
        LabelSource::Embedded => mesh
            .labels()
            .map(|l| Some(l.to_vec()))
            .ok_or_else(|| Error::invalid("layer mesh carries no embedded labels")),
        LabelSource::File { path } => Ok(Some(load_labels(manifest.resolve(path))?)),
        LabelSource::Masks { .. } => Ok(None),
    }
}
