use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::{BodyFiles, LabelSource, LayerEntry, Manifest, Params, MANIFEST_SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::geometry::io::save_mesh;
use crate::geometry::TriMesh;
use crate::rasterview::{render_buffers, sample_views, save_cameras, LabelMask, TurntableLayout};
use crate::skinning::{save_pose, save_weights};
use crate::synthgen::Fixture;

/// Turntable masks written instead of embedded labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskOptions {
    pub resolution: u32,
    pub layout: TurntableLayout,
}

impl Default for MaskOptions {
    fn default() -> Self {
        MaskOptions {
            resolution: 256,
            layout: TurntableLayout::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FixtureOptions {
    pub params: Params,
    pub seed: u64,
    pub masks: Option<MaskOptions>,
}

/// Garment part of a rest-pose layer without its seeded penetrations: the
/// surface the pipeline should ideally recover.
pub fn reference_garment(fixture: &Fixture, k: usize) -> Result<TriMesh> {
    let layer = fixture
        .layers
        .get(k)
        .ok_or_else(|| Error::invalid(format!("fixture has no layer {}", k + 1)))?;
    let body = &fixture.body;
    let verts = body
        .body
        .mesh
        .vertices()
        .iter()
        .zip(&body.normals)
        .zip(&layer.offsets)
        .map(|((p, n), &o)| p + n * o)
        .collect();
    let full = TriMesh::new(verts, body.body.mesh.faces().to_vec())?;
    let mut in_set = vec![false; full.vertex_count()];
    for &v in &layer.garment_set {
        in_set[v] = true;
    }
    let keep = full.faces_within(&in_set);
    Ok(full.submesh(|f| keep[f]).0)
}

/// Renders `mesh` from every camera; a pixel is garment when at least two
/// vertices of the face drawn there carry `label`.
fn garment_masks(mesh: &TriMesh, label: i32, cameras: &[crate::rasterview::Camera]) -> Result<Vec<LabelMask>> {
    let labels = mesh
        .labels()
        .ok_or_else(|| Error::invalid("mask rendering needs a labeled mesh"))?;
    cameras
        .iter()
        .map(|cam| {
            let buf = render_buffers(&[mesh], cam);
            let data = buf
                .face_id
                .iter()
                .map(|&f| {
                    f != crate::rasterview::BACKGROUND
                        && mesh.faces()[f as usize].iter().filter(|&&v| labels[v] == label).count() >= 2
                })
                .collect();
            LabelMask::new(buf.width, buf.height, data)
        })
        .collect()
}

/// Writes a fixture as pipeline input under `dir`: body mesh and weights,
/// posed layer meshes with their poses, reference garments and a
/// `manifest.json` tying them together. Returns the manifest as loaded
/// from disk.
pub fn write_fixture(fixture: &Fixture, dir: impl AsRef<Path>, options: &FixtureOptions) -> Result<Manifest> {
    let dir = dir.as_ref();
    let subdirs: &[&str] = if options.masks.is_some() {
        &["", "reference", "masks"]
    } else {
        &["", "reference"]
    };
    for sub in subdirs {
        let d = dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    save_mesh(dir.join("body.ply"), &fixture.body.body.mesh)?;
    save_weights(dir.join("body.weights"), &fixture.body.body.weights)?;
    let mut layers = Vec::with_capacity(fixture.layers.len());
    for (k, layer) in fixture.layers.iter().enumerate() {
        let n = k + 1;
        let mesh_rel = PathBuf::from(format!("layer_{n}.ply"));
        let pose_rel = PathBuf::from(format!("layer_{n}_pose.json"));
        let ref_rel = PathBuf::from(format!("reference/garment_{n}.ply"));
        let posed = &fixture.posed[k];
        let labels = match &options.masks {
            None => {
                save_mesh(dir.join(&mesh_rel), posed)?;
                LabelSource::Embedded
            }
            Some(mo) => {
                let bounds = posed.bounds();
                let cams = sample_views(
                    &bounds.center(),
                    1.5 * bounds.diagonal(),
                    [mo.resolution, mo.resolution],
                    &mo.layout,
                )?;
                let masks = garment_masks(posed, layer.label, &cams)?;
                let mut unlabeled = posed.clone();
                unlabeled.set_labels(None)?;
                save_mesh(dir.join(&mesh_rel), &unlabeled)?;
                let cams_rel = PathBuf::from(format!("masks/layer_{n}_cameras.json"));
                save_cameras(dir.join(&cams_rel), &cams)?;
                let mut paths = Vec::with_capacity(masks.len());
                for (i, m) in masks.iter().enumerate() {
                    let rel = PathBuf::from(format!("masks/layer_{n}_view_{i:02}.png"));
                    m.save(dir.join(&rel))?;
                    paths.push(rel);
                }
                LabelSource::Masks {
                    masks: paths,
                    cameras: cams_rel,
                }
            }
        };
        save_pose(dir.join(&pose_rel), &fixture.poses[k])?;
        save_mesh(dir.join(&ref_rel), &reference_garment(fixture, k)?)?;
        layers.push(LayerEntry {
            mesh: mesh_rel,
            pose: pose_rel,
            labels,
            garment_label: layer.label,
            reference: Some(ref_rel),
        });
    }
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA_VERSION,
        body: BodyFiles {
            mesh: "body.ply".into(),
            weights: "body.weights".into(),
        },
        canonical_pose: None,
        layers,
        params: options.params.clone(),
        seed: options.seed,
        output_dir: "out".into(),
        base_dir: dir.to_path_buf(),
    };
    let path = dir.join("manifest.json");
    manifest.save(&path)?;
    Manifest::load(&path)
}
