use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{direct_labels, LabelSource, Manifest};
use crate::error::{Error, Result};
use crate::extraction::{back_faces, bake_model_grid, marching_cubes};
use crate::geometry::io::{load_mesh, save_mesh};
use crate::geometry::{Point3, TriMesh, Vec3};
use crate::layering::{canonicalize_layer_to, remove_penetrations_with_stats, LayerPassStats, LayerStack, StackLayer};
use crate::metrics::{chamfer_distance, intersection_ratio, normal_consistency, LayerMetrics, MetricReport};
use crate::rasterview::{load_cameras, refine_labels, vote_vertex_labels, LabelMask};
use crate::skinning::{load_pose, load_weights, SkinnedBody};
use crate::udfnet::{
    load_checkpoint, sample_training_points, save_checkpoint, save_loss_csv, train_udf, MlpUdf,
};

/// Pipeline stages in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Labels,
    Canonicalize,
    Penetration,
    Udf,
    Extract,
    Metrics,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Labels,
        Stage::Canonicalize,
        Stage::Penetration,
        Stage::Udf,
        Stage::Extract,
        Stage::Metrics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Labels => "labels",
            Stage::Canonicalize => "canonicalize",
            Stage::Penetration => "penetration",
            Stage::Udf => "udf",
            Stage::Extract => "extract",
            Stage::Metrics => "metrics",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<_> = Stage::ALL.iter().map(|s| s.name()).collect();
                Error::Usage(format!("unknown stage `{s}`; expected one of {}", names.join(", ")))
            })
    }
}

/// Inclusive range of stages, written `first..last`, `first..`, `..last`
/// or a single stage name.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageRange {
    pub first: Stage,
    pub last: Stage,
}

impl StageRange {
    pub fn all() -> Self {
        StageRange {
            first: Stage::Labels,
            last: Stage::Metrics,
        }
    }

    pub fn contains(&self, s: Stage) -> bool {
        self.first <= s && s <= self.last
    }

    pub fn stages(&self) -> impl Iterator<Item = Stage> + '_ {
        Stage::ALL.into_iter().filter(|s| self.contains(*s))
    }
}

impl FromStr for StageRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (first, last) = match s.split_once("..") {
            Some((a, b)) => (
                if a.trim().is_empty() { Stage::Labels } else { a.parse()? },
                if b.trim().is_empty() { Stage::Metrics } else { b.parse()? },
            ),
            None => {
                let st = s.parse()?;
                (st, st)
            }
        };
        if first > last {
            return Err(Error::Usage(format!("stage range `{s}` runs backwards")));
        }
        Ok(StageRange { first, last })
    }
}

/// What one stage did for one layer.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerSummary {
    pub layer: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub garment_vertices: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penetration: Option<LayerPassStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_loss: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub faces: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flipped_faces: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub wall_seconds: f64,
    /// Files written, relative to the output directory.
    pub outputs: Vec<PathBuf>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub layers: Vec<LayerSummary>,
}

/// Everything needed to reproduce a run, kept as `run.json` in the output
/// directory. Stages from earlier invocations stay listed until rerun.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub tool_version: String,
    /// Directory the manifest's relative paths were resolved against.
    pub manifest_dir: PathBuf,
    pub manifest: Manifest,
    pub stages: Vec<StageRecord>,
}

impl RunRecord {
    pub const FILE_NAME: &'static str = "run.json";

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.line(), e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn stage(&self, s: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|r| r.stage == s)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &String> {
        self.stages.iter().flat_map(|s| s.warnings.iter())
    }
}

/// Artifact locations inside the output directory.
pub mod artifacts {
    use std::path::PathBuf;

    use super::Stage;

    pub fn stage_dir(stage: Stage) -> PathBuf {
        PathBuf::from(stage.name())
    }

    pub fn labeled_layer(k: usize) -> PathBuf {
        stage_dir(Stage::Labels).join(format!("layer_{k}.ply"))
    }

    pub fn canonical_body() -> PathBuf {
        stage_dir(Stage::Canonicalize).join("body.ply")
    }

    pub fn canonical_layer(k: usize) -> PathBuf {
        stage_dir(Stage::Canonicalize).join(format!("layer_{k}.ply"))
    }

    pub fn resolved_layer(k: usize) -> PathBuf {
        stage_dir(Stage::Penetration).join(format!("layer_{k}.ply"))
    }

    pub fn checkpoint(k: usize) -> PathBuf {
        stage_dir(Stage::Udf).join(format!("layer_{k}.ckpt"))
    }

    pub fn loss_curve(k: usize) -> PathBuf {
        stage_dir(Stage::Udf).join(format!("layer_{k}_loss.csv"))
    }

    pub fn garment(k: usize) -> PathBuf {
        stage_dir(Stage::Extract).join(format!("garment_{k}.ply"))
    }

    pub fn grid(k: usize) -> PathBuf {
        stage_dir(Stage::Extract).join(format!("grid_{k}.bin"))
    }

    pub fn report() -> PathBuf {
        stage_dir(Stage::Metrics).join("report.json")
    }
}

/// Independent seed for `(stage, layer)` drawn from the run seed.
pub fn derive_seed(run_seed: u64, stage: Stage, layer: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    rng.set_stream(((stage as u64) << 32) | layer as u64);
    rng.random()
}

struct Ctx<'a> {
    manifest: &'a Manifest,
    out: PathBuf,
}

impl Ctx<'_> {
    fn path(&self, rel: &Path) -> PathBuf {
        self.out.join(rel)
    }

    fn read_mesh(&self, stage: Stage, rel: &Path, layer: Option<usize>) -> Result<TriMesh> {
        let p = self.path(rel);
        if !p.is_file() {
            return Err(stage_error(
                stage,
                layer,
                Error::invalid(format!(
                    "missing artifact {}; run the earlier stages first",
                    p.display()
                )),
            ));
        }
        load_mesh(&p).map_err(|e| stage_error(stage, layer, e))
    }

    fn write_mesh(&self, rel: &Path, mesh: &TriMesh, outputs: &mut Vec<PathBuf>) -> Result<()> {
        save_mesh(self.path(rel), mesh)?;
        outputs.push(rel.to_path_buf());
        Ok(())
    }

    fn body(&self) -> Result<SkinnedBody> {
        let m = self.manifest;
        let mesh = load_mesh(m.resolve(&m.body.mesh))?;
        let weights = load_weights(m.resolve(&m.body.weights))?;
        SkinnedBody::new(mesh, weights)
    }

    /// Canonical body: the rest mesh moved to the canonical pose, if any.
    fn canonical_body(&self) -> Result<SkinnedBody> {
        let body = self.body()?;
        let mesh = self.read_mesh(Stage::Canonicalize, &artifacts::canonical_body(), None)?;
        SkinnedBody::new(mesh, body.weights)
    }
}

fn stage_error(stage: Stage, layer: Option<usize>, source: Error) -> Error {
    match source {
        already @ Error::Stage { .. } => already,
        other => Error::Stage {
            stage: stage.name().to_string(),
            layer,
            source: Box::new(other),
        },
    }
}

fn garment_set(mesh: &TriMesh, label: i32) -> Vec<usize> {
    mesh.labeled_vertices(label)
}

struct StageOutput {
    outputs: Vec<PathBuf>,
    warnings: Vec<String>,
    layers: Vec<LayerSummary>,
}

impl StageOutput {
    fn new() -> Self {
        StageOutput {
            outputs: Vec::new(),
            warnings: Vec::new(),
            layers: Vec::new(),
        }
    }
}

/// Runs the stages of `range` in order, writing artifacts under the
/// manifest's output directory and updating `run.json` after every stage.
/// Stages read their inputs from the artifacts of the previous stage, so a
/// range can resume where an earlier invocation stopped.
pub fn run_pipeline(manifest: &Manifest, range: StageRange) -> Result<RunRecord> {
    let out = manifest.output_dir();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let record_path = out.join(RunRecord::FILE_NAME);
    let previous = RunRecord::load(&record_path).ok();
    let mut record = RunRecord {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        manifest_dir: manifest.base_dir.clone(),
        manifest: manifest.clone(),
        stages: previous
            .map(|p| p.stages.into_iter().filter(|s| !range.contains(s.stage)).collect())
            .unwrap_or_default(),
    };
    let ctx = Ctx { manifest, out };
    for stage in range.stages() {
        let dir = ctx.path(&artifacts::stage_dir(stage));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let started = Instant::now();
        log::info!("stage {stage}");
        let result = match stage {
            Stage::Labels => run_labels(&ctx),
            Stage::Canonicalize => run_canonicalize(&ctx),
            Stage::Penetration => run_penetration(&ctx),
            Stage::Udf => run_udf(&ctx),
            Stage::Extract => run_extract(&ctx),
            Stage::Metrics => run_metrics(&ctx),
        };
        match result {
            Ok(o) => {
                for w in &o.warnings {
                    log::warn!("{stage}: {w}");
                }
                record.stages.push(StageRecord {
                    stage,
                    wall_seconds: started.elapsed().as_secs_f64(),
                    outputs: o.outputs,
                    warnings: o.warnings,
                    layers: o.layers,
                });
                record.stages.sort_by_key(|s| s.stage);
                record.save(&record_path)?;
            }
            Err(e) => {
                record.save(&record_path)?;
                return Err(stage_error(stage, None, e));
            }
        }
    }
    Ok(record)
}

fn run_labels(ctx: &Ctx) -> Result<StageOutput> {
    let m = ctx.manifest;
    let mut out = StageOutput::new();
    for (k, layer) in m.layers.iter().enumerate() {
        let at = |e| stage_error(Stage::Labels, Some(k + 1), e);
        let mut mesh = load_mesh(m.resolve(&layer.mesh)).map_err(at)?;
        let labels = match direct_labels(m, layer, &mesh).map_err(at)? {
            Some(l) => l,
            None => {
                let LabelSource::Masks { masks, cameras } = &layer.labels else {
                    unreachable!("only mask sources need voting");
                };
                let cams = load_cameras(m.resolve(cameras)).map_err(at)?;
                if cams.len() != masks.len() {
                    return Err(at(Error::invalid(format!(
                        "{} masks for {} cameras",
                        masks.len(),
                        cams.len()
                    ))));
                }
                let views = cams
                    .into_iter()
                    .zip(masks)
                    .map(|(c, p)| Ok((c, LabelMask::load(m.resolve(p))?)))
                    .collect::<Result<Vec<_>>>()
                    .map_err(at)?;
                let voted = vote_vertex_labels(&mesh, &views, layer.garment_label).map_err(at)?;
                refine_labels(&mesh, &voted, m.params.smoothing_iters).map_err(at)?
            }
        };
        mesh.set_labels(Some(labels)).map_err(at)?;
        let count = garment_set(&mesh, layer.garment_label).len();
        if count == 0 {
            return Err(at(Error::invalid(format!("no vertex is labeled {}", layer.garment_label))));
        }
        ctx.write_mesh(&artifacts::labeled_layer(k + 1), &mesh, &mut out.outputs)
            .map_err(at)?;
        out.layers.push(LayerSummary {
            layer: k + 1,
            garment_vertices: Some(count),
            ..Default::default()
        });
    }
    Ok(out)
}

fn run_canonicalize(ctx: &Ctx) -> Result<StageOutput> {
    let m = ctx.manifest;
    let mut out = StageOutput::new();
    let body = ctx.body()?;
    let canonical = m.canonical_pose.as_ref().map(|p| load_pose(m.resolve(p))).transpose()?;
    let body_c = match &canonical {
        Some(c) => body.posed(c)?,
        None => body.mesh.clone(),
    };
    ctx.write_mesh(&artifacts::canonical_body(), &body_c, &mut out.outputs)?;
    for (k, layer) in m.layers.iter().enumerate() {
        let at = |e| stage_error(Stage::Canonicalize, Some(k + 1), e);
        let mesh = ctx.read_mesh(Stage::Canonicalize, &artifacts::labeled_layer(k + 1), Some(k + 1))?;
        let pose = load_pose(m.resolve(&layer.pose)).map_err(at)?;
        let rest = canonicalize_layer_to(&mesh, &body, &pose, canonical.as_ref()).map_err(at)?;
        ctx.write_mesh(&artifacts::canonical_layer(k + 1), &rest, &mut out.outputs)
            .map_err(at)?;
        out.layers.push(LayerSummary {
            layer: k + 1,
            ..Default::default()
        });
    }
    Ok(out)
}

fn run_penetration(ctx: &Ctx) -> Result<StageOutput> {
    let m = ctx.manifest;
    let mut out = StageOutput::new();
    let body = ctx.canonical_body()?;
    let mut layers = Vec::with_capacity(m.layers.len());
    for (k, entry) in m.layers.iter().enumerate() {
        let mesh = ctx.read_mesh(Stage::Penetration, &artifacts::canonical_layer(k + 1), Some(k + 1))?;
        let garment_set = garment_set(&mesh, entry.garment_label);
        layers.push(StackLayer { mesh, garment_set });
    }
    let stack = LayerStack::new(body, layers, m.params.epsilon)?;
    let resolved = remove_penetrations_with_stats(&stack)?;
    for (k, (mesh, stats)) in resolved.iter().enumerate() {
        if stats.open_previous {
            out.warnings.push(format!(
                "surface below layer {} does not look closed; containment tests may be unreliable",
                k + 1
            ));
        }
        if stats.line_misses > 0 {
            out.warnings.push(format!(
                "layer {}: {} displacement lines missed the layer below; used the fallback placement",
                k + 1,
                stats.line_misses
            ));
        }
        ctx.write_mesh(&artifacts::resolved_layer(k + 1), mesh, &mut out.outputs)?;
        out.layers.push(LayerSummary {
            layer: k + 1,
            garment_vertices: Some(stack.layers[k].garment_set.len()),
            penetration: Some(*stats),
            ..Default::default()
        });
    }
    Ok(out)
}

fn run_udf(ctx: &Ctx) -> Result<StageOutput> {
    let m = ctx.manifest;
    let p = &m.params;
    let mut out = StageOutput::new();
    let inputs = (0..m.layers.len())
        .map(|k| ctx.read_mesh(Stage::Udf, &artifacts::resolved_layer(k + 1), Some(k + 1)))
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<Result<LayerSummary>> = inputs
        .par_iter()
        .enumerate()
        .map(|(k, mesh)| {
            let at = |e| stage_error(Stage::Udf, Some(k + 1), e);
            let seed = derive_seed(m.seed, Stage::Udf, k + 1);
            let set = garment_set(mesh, m.layers[k].garment_label);
            let samples = sample_training_points(mesh, &set, &p.sampling, seed).map_err(at)?;
            let mut model = MlpUdf::new(p.pe_count, &p.hidden, p.delta, seed).map_err(at)?;
            model.zero_output_layer();
            let trained = train_udf(model, &samples, &p.train.config(seed)).map_err(at)?;
            save_checkpoint(ctx.path(&artifacts::checkpoint(k + 1)), &trained.model).map_err(at)?;
            save_loss_csv(ctx.path(&artifacts::loss_curve(k + 1)), &trained.loss_history).map_err(at)?;
            Ok(LayerSummary {
                layer: k + 1,
                seed: Some(seed),
                samples: Some(samples.len()),
                final_loss: trained.loss_history.last().copied(),
                ..Default::default()
            })
        })
        .collect();
    for (k, r) in results.into_iter().enumerate() {
        out.layers.push(r?);
        out.outputs.push(artifacts::checkpoint(k + 1));
        out.outputs.push(artifacts::loss_curve(k + 1));
    }
    Ok(out)
}

/// Grid bounds around a garment: `resolution` cells along the longest
/// side, leaving `tau` plus two cells free on every side.
fn extraction_bounds(garment: &TriMesh, tau: f64, resolution: usize) -> Result<crate::geometry::Aabb> {
    let b = garment.bounds();
    if b.is_empty() {
        return Err(Error::invalid("garment has no vertices"));
    }
    let ext = b.extent().max();
    let cell = (ext + 2.0 * tau) / (resolution as f64 - 4.0);
    Ok(b.inflated(tau + 2.0 * cell))
}

/// Summary, written files and an optional warning of one layer.
type LayerOutcome = (LayerSummary, Vec<PathBuf>, Option<String>);

fn run_extract(ctx: &Ctx) -> Result<StageOutput> {
    let m = ctx.manifest;
    let p = &m.params;
    let mut out = StageOutput::new();
    let body = ctx.canonical_body()?;
    let joints: Vec<Point3> = body.joint_centers();
    let view_dir = Vec3::from(p.orientation.view_dir);
    let inputs = (0..m.layers.len())
        .map(|k| {
            let mesh = ctx.read_mesh(Stage::Extract, &artifacts::resolved_layer(k + 1), Some(k + 1))?;
            let ckpt = ctx.path(&artifacts::checkpoint(k + 1));
            if !ckpt.is_file() {
                return Err(stage_error(
                    Stage::Extract,
                    Some(k + 1),
                    Error::invalid(format!("missing artifact {}; run the udf stage first", ckpt.display())),
                ));
            }
            let model = load_checkpoint(&ckpt).map_err(|e| stage_error(Stage::Extract, Some(k + 1), e))?;
            Ok((mesh, model))
        })
        .collect::<Result<Vec<_>>>()?;
    let results: Vec<Result<LayerOutcome>> = inputs
        .par_iter()
        .enumerate()
        .map(|(k, (mesh, model))| {
            let at = |e| stage_error(Stage::Extract, Some(k + 1), e);
            let set = garment_set(mesh, m.layers[k].garment_label);
            let mut in_set = vec![false; mesh.vertex_count()];
            for &v in &set {
                in_set[v] = true;
            }
            let keep = mesh.faces_within(&in_set);
            let (garment, _) = mesh.submesh(|f| keep[f]);
            let bounds = extraction_bounds(&garment, p.tau, p.grid_resolution).map_err(at)?;
            let grid = bake_model_grid(model, &bounds, p.grid_resolution).map_err(at)?;
            let mut written = Vec::new();
            if p.dump_grids {
                grid.save(ctx.path(&artifacts::grid(k + 1))).map_err(at)?;
                written.push(artifacts::grid(k + 1));
            }
            let shell = marching_cubes(&grid, p.tau).map_err(at)?;
            let mut warning = None;
            let (result, flipped) = if shell.is_empty() {
                warning = Some(format!("layer {}: the distance field never reaches tau; garment is empty", k + 1));
                (shell, 0)
            } else {
                let flips = back_faces(&shell, &joints, &view_dir, p.orientation.xi).map_err(at)?;
                let mut oriented = shell;
                let mut flipped = 0;
                for (f, _) in flips.iter().enumerate().filter(|(_, &b)| b) {
                    oriented.flip_face(f);
                    flipped += 1;
                }
                (oriented, flipped)
            };
            ctx.write_mesh(&artifacts::garment(k + 1), &result, &mut written).map_err(at)?;
            Ok((
                LayerSummary {
                    layer: k + 1,
                    faces: Some(result.face_count()),
                    flipped_faces: Some(flipped),
                    ..Default::default()
                },
                written,
                warning,
            ))
        })
        .collect();
    for r in results {
        let (summary, written, warning) = r?;
        out.layers.push(summary);
        out.outputs.extend(written);
        out.warnings.extend(warning);
    }
    Ok(out)
}

fn run_metrics(ctx: &Ctx) -> Result<StageOutput> {
    let m = ctx.manifest;
    let p = &m.params.metrics;
    let mut out = StageOutput::new();
    let body = ctx.read_mesh(Stage::Metrics, &artifacts::canonical_body(), None)?;
    let garments = (0..m.layers.len())
        .map(|k| ctx.read_mesh(Stage::Metrics, &artifacts::garment(k + 1), Some(k + 1)))
        .collect::<Result<Vec<_>>>()?;
    let mut layers = Vec::with_capacity(garments.len());
    for (k, g) in garments.iter().enumerate() {
        let at = |e| stage_error(Stage::Metrics, Some(k + 1), e);
        let mut lm = LayerMetrics {
            layer: k + 1,
            chamfer_mm: None,
            normal_consistency: None,
            intersection_ratio_percent: None,
        };
        if g.is_empty() {
            out.warnings.push(format!("layer {}: empty garment, no metrics", k + 1));
            layers.push(lm);
            continue;
        }
        let mut inner: Vec<&TriMesh> = vec![&body];
        inner.extend(garments[..k].iter().filter(|x| !x.is_empty()));
        match intersection_ratio(g, &inner, p.resolution) {
            Ok(ir) => lm.intersection_ratio_percent = Some(ir),
            Err(Error::UndefinedMetric(msg)) => out.warnings.push(format!("layer {}: {msg}", k + 1)),
            Err(e) => return Err(at(e)),
        }
        if let Some(r) = &m.layers[k].reference {
            let reference = load_mesh(m.resolve(r)).map_err(at)?;
            let seed = derive_seed(m.seed, Stage::Metrics, k + 1);
            lm.chamfer_mm = Some(chamfer_distance(g, &reference, p.samples, seed).map_err(at)?);
            lm.normal_consistency = Some(normal_consistency(g, &reference, p.samples, seed).map_err(at)?);
        }
        layers.push(lm);
    }
    let report = MetricReport::from_layers(layers, p.samples, p.resolution, m.seed);
    report.save_json(ctx.path(&artifacts::report()))?;
    out.outputs.push(artifacts::report());
    Ok(out)
}
