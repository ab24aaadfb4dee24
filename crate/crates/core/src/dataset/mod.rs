//! Annotated samples, CAD catalogs and the JSON manifest that indexes them.
//!
//! A dataset root holds `manifest.json` plus the PNG images and OBJ meshes it
//! references by relative path:
//!
//! ```json
//! {"class": "car",
//!  "cads": [{"id": 0, "name": "sedan", "mesh": "cads/0.obj", "keypoints3d": {"name": [x, y, z]}}],
//!  "samples": [{"id": "s1", "image": "images/s1.png", "keypoints2d": {"name": [u, v]},
//!               "view": {"azimuth_deg": 30, "elevation_deg": 10, "radius": 140}, "cad_id": 0}]}
//! ```
//!
//! 2D keypoints are normalized by image width and height. A view is either a
//! spherical orbit pose around the origin or `{"matrix": [...]}`, a row-major
//! 4x4 camera-to-world pose.

mod color;
mod sampler;

pub use color::{decode_lab8, encode_lab8, lab_to_rgb, lab_to_srgb, rgb_to_lab, srgb_to_lab};
pub use sampler::{perturb_keypoints, SamplerMode, ViewpointSampler, AZIMUTH_RING};

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use nalgebra::{Matrix4, Point2, Point3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{orbit_viewpoint, GeometryError, KeypointSet2D, KeypointSet3D, SphericalPose, Viewpoint};
use crate::raster::{Mesh, MeshError};
use crate::warp::class_keypoints;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no manifest at {0}")]
    MissingManifest(PathBuf),
    #[error("manifest is not valid: {0}")]
    InvalidManifest(#[from] serde_json::Error),
    #[error("dataset class is {found:?}, expected {expected:?}")]
    ClassMismatch { expected: String, found: String },
    #[error("cad {0} is listed twice")]
    DuplicateCad(u32),
    #[error("cad {id}: {source}")]
    CadMesh { id: u32, source: MeshError },
    #[error("cad {id}: {message}")]
    CadKeypoints { id: u32, message: String },
    #[error("image {path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Why a manifest entry was left out of the loaded samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum SkipReason {
    Malformed(String),
    UnknownCad(u32),
    MalformedKeypoints(String),
    InvalidView(String),
    Image(String),
    DuplicateId,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedSample {
    pub index: usize,
    pub id: Option<String>,
    pub reason: SkipReason,
}

/// Annotated camera of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ViewSpec {
    Spherical(SphericalPose),
    /// Camera-to-world rigid pose, kept exactly as annotated.
    Pose(Matrix4<f64>),
}

impl ViewSpec {
    pub fn viewpoint(&self) -> Result<Viewpoint, GeometryError> {
        match self {
            ViewSpec::Spherical(p) => orbit_viewpoint(p),
            ViewSpec::Pose(m) => Viewpoint::from_pose_matrix(m),
        }
    }

    pub fn from_viewpoint(view: &Viewpoint) -> Self {
        ViewSpec::Pose(view.to_pose_matrix())
    }

    /// Orbit pose of the camera center about the origin.
    pub fn spherical(&self) -> Result<SphericalPose, GeometryError> {
        match self {
            ViewSpec::Spherical(p) => Ok(*p),
            ViewSpec::Pose(m) => SphericalPose::from_center(&Point3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]), &Point3::origin()),
        }
    }
}

impl Serialize for ViewSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        ViewEntry::from(self).serialize(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum ViewEntry {
    Matrix {
        matrix: [f64; 16],
    },
    Spherical {
        azimuth_deg: f64,
        elevation_deg: f64,
        radius: f64,
    },
}

impl From<&ViewSpec> for ViewEntry {
    fn from(v: &ViewSpec) -> Self {
        match v {
            ViewSpec::Spherical(p) => ViewEntry::Spherical {
                azimuth_deg: p.azimuth_deg(),
                elevation_deg: p.elevation_deg(),
                radius: p.radius(),
            },
            ViewSpec::Pose(m) => {
                let mut matrix = [0.0; 16];
                for r in 0..4 {
                    for c in 0..4 {
                        matrix[r * 4 + c] = m[(r, c)];
                    }
                }
                ViewEntry::Matrix { matrix }
            }
        }
    }
}

impl TryFrom<&ViewEntry> for ViewSpec {
    type Error = GeometryError;
    fn try_from(e: &ViewEntry) -> Result<Self, GeometryError> {
        match e {
            ViewEntry::Spherical {
                azimuth_deg,
                elevation_deg,
                radius,
            } => Ok(ViewSpec::Spherical(SphericalPose::new(*azimuth_deg, *elevation_deg, *radius)?)),
            ViewEntry::Matrix { matrix } => {
                let m = Matrix4::from_row_slice(matrix);
                Viewpoint::from_pose_matrix(&m)?;
                Ok(ViewSpec::Pose(m))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedSample {
    pub id: String,
    pub class: String,
    /// Image path relative to the dataset root.
    pub image_path: String,
    pub image: RgbImage,
    /// Normalized image coordinates.
    pub keypoints: KeypointSet2D,
    pub view: ViewSpec,
    pub cad_id: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CadModel {
    pub id: u32,
    pub name: String,
    /// Mesh path relative to the dataset root.
    pub mesh_path: String,
    pub mesh: Mesh,
    pub keypoints: KeypointSet3D,
}

/// CAD models of one class, keyed by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CadCatalog {
    pub class: String,
    cads: BTreeMap<u32, CadModel>,
}

impl CadCatalog {
    pub fn new(class: impl Into<String>) -> Self {
        Self {
            class: class.into(),
            cads: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, cad: CadModel) -> Option<CadModel> {
        self.cads.insert(cad.id, cad)
    }

    pub fn get(&self, id: u32) -> Option<&CadModel> {
        self.cads.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &CadModel> {
        self.cads.values()
    }

    pub fn len(&self) -> usize {
        self.cads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cads.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub catalog: CadCatalog,
    /// Sorted by id.
    pub samples: Vec<AnnotatedSample>,
    pub skipped: Vec<SkippedSample>,
}

impl Dataset {
    pub fn class(&self) -> &str {
        &self.catalog.class
    }

    pub fn sample(&self, id: &str) -> Option<&AnnotatedSample> {
        self.samples
            .binary_search_by(|s| s.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.samples[i])
    }

    /// Orbit poses of all annotated samples.
    pub fn poses(&self) -> Vec<SphericalPose> {
        self.samples.iter().filter_map(|s| s.view.spherical().ok()).collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    class: String,
    #[serde(default)]
    cads: Vec<CadEntry>,
    #[serde(default)]
    samples: Vec<serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CadEntry {
    id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    mesh: String,
    keypoints3d: BTreeMap<String, [f64; 3]>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleEntry {
    id: String,
    image: String,
    keypoints2d: BTreeMap<String, [f64; 2]>,
    view: ViewEntry,
    cad_id: u32,
}

fn check_keypoint_names<'a>(class: &str, names: impl Iterator<Item = &'a String> + Clone) -> Result<(), String> {
    let Some(catalog) = class_keypoints(class) else {
        return Ok(());
    };
    let given: BTreeSet<&str> = names.map(String::as_str).collect();
    if let Some(unknown) = given.iter().find(|n| !catalog.contains(n)) {
        return Err(format!("{unknown:?} is not a {class} keypoint"));
    }
    let missing: Vec<&str> = catalog.iter().copied().filter(|n| !given.contains(n)).collect();
    if !missing.is_empty() {
        return Err(format!("missing {}", missing.join(", ")));
    }
    Ok(())
}

/// Loads `root/manifest.json`. Invalid samples are skipped and reported in
/// [`Dataset::skipped`]; problems with the manifest itself or with a CAD
/// model are errors. `class`, when given, must match the manifest.
pub fn load_dataset(root: impl AsRef<Path>, class: Option<&str>) -> Result<Dataset, DatasetError> {
    let root = root.as_ref();
    let manifest_path = root.join(MANIFEST_FILE);
    let text = match fs::read_to_string(&manifest_path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(DatasetError::MissingManifest(manifest_path))
        }
        Err(e) => return Err(e.into()),
    };
    let manifest: Manifest = serde_json::from_str(&text)?;
    if let Some(expected) = class {
        if expected != manifest.class {
            return Err(DatasetError::ClassMismatch {
                expected: expected.to_owned(),
                found: manifest.class,
            });
        }
    }

    let mut catalog = CadCatalog::new(manifest.class.clone());
    for entry in manifest.cads {
        let id = entry.id;
        if catalog.get(id).is_some() {
            return Err(DatasetError::DuplicateCad(id));
        }
        let mesh = Mesh::load_obj(root.join(&entry.mesh)).map_err(|source| DatasetError::CadMesh { id, source })?;
        check_keypoint_names(&manifest.class, entry.keypoints3d.keys())
            .map_err(|message| DatasetError::CadKeypoints { id, message })?;
        if entry.keypoints3d.values().flatten().any(|v| !v.is_finite()) {
            return Err(DatasetError::CadKeypoints {
                id,
                message: "non-finite coordinate".into(),
            });
        }
        catalog.insert(CadModel {
            id,
            name: entry.name.unwrap_or_else(|| format!("cad-{id}")),
            mesh_path: entry.mesh,
            mesh,
            keypoints: entry
                .keypoints3d
                .into_iter()
                .map(|(k, [x, y, z])| (k, Point3::new(x, y, z)))
                .collect(),
        });
    }

    let mut samples: Vec<AnnotatedSample> = Vec::new();
    let mut skipped = Vec::new();
    let mut seen = BTreeSet::new();
    for (index, value) in manifest.samples.into_iter().enumerate() {
        let id_hint = value.get("id").and_then(|v| v.as_str()).map(str::to_owned);
        let mut skip = |reason: SkipReason| {
            log::warn!("skipping sample #{index} ({}): {reason:?}", id_hint.as_deref().unwrap_or("?"));
            skipped.push(SkippedSample {
                index,
                id: id_hint.clone(),
                reason,
            });
        };
        let entry: SampleEntry = match serde_json::from_value(value) {
            Ok(e) => e,
            Err(e) => {
                skip(SkipReason::Malformed(e.to_string()));
                continue;
            }
        };
        if !seen.insert(entry.id.clone()) {
            skip(SkipReason::DuplicateId);
            continue;
        }
        if catalog.get(entry.cad_id).is_none() {
            skip(SkipReason::UnknownCad(entry.cad_id));
            continue;
        }
        if let Err(msg) = check_keypoint_names(&manifest.class, entry.keypoints2d.keys()) {
            skip(SkipReason::MalformedKeypoints(msg));
            continue;
        }
        if entry.keypoints2d.values().flatten().any(|v| !v.is_finite()) {
            skip(SkipReason::MalformedKeypoints("non-finite coordinate".into()));
            continue;
        }
        let view = match ViewSpec::try_from(&entry.view) {
            Ok(v) => v,
            Err(e) => {
                skip(SkipReason::InvalidView(e.to_string()));
                continue;
            }
        };
        let image = match image::open(root.join(&entry.image)) {
            Ok(img) => img.to_rgb8(),
            Err(e) => {
                skip(SkipReason::Image(e.to_string()));
                continue;
            }
        };
        if image.width() != image.height() || image.width() < 10 {
            skip(SkipReason::Image(format!(
                "expected a square image of side >= 10, got {}x{}",
                image.width(),
                image.height()
            )));
            continue;
        }
        samples.push(AnnotatedSample {
            id: entry.id,
            class: manifest.class.clone(),
            image_path: entry.image,
            image,
            keypoints: entry
                .keypoints2d
                .into_iter()
                .map(|(k, [u, v])| (k, Point2::new(u, v)))
                .collect(),
            view,
            cad_id: entry.cad_id,
        });
    }
    samples.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(Dataset {
        catalog,
        samples,
        skipped,
    })
}

/// Writes a dataset (manifest, PNG images and OBJ meshes) under `root`,
/// using each item's relative path. Loading the result yields the same
/// catalog and samples.
pub fn write_dataset(root: impl AsRef<Path>, catalog: &CadCatalog, samples: &[AnnotatedSample]) -> Result<(), DatasetError> {
    let root = root.as_ref();
    fs::create_dir_all(root)?;
    let ensure_parent = |p: &Path| -> std::io::Result<()> {
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        Ok(())
    };
    let mut cads = Vec::new();
    for cad in catalog.iter() {
        let path = root.join(&cad.mesh_path);
        ensure_parent(&path)?;
        fs::write(&path, cad.mesh.to_obj_string())?;
        cads.push(CadEntry {
            id: cad.id,
            name: Some(cad.name.clone()),
            mesh: cad.mesh_path.clone(),
            keypoints3d: cad.keypoints.0.iter().map(|(k, p)| (k.clone(), [p.x, p.y, p.z])).collect(),
        });
    }
    let mut entries = Vec::new();
    for s in samples {
        let path = root.join(&s.image_path);
        ensure_parent(&path)?;
        s.image
            .save_with_format(&path, image::ImageFormat::Png)
            .map_err(|source| DatasetError::Image { path, source })?;
        let entry = SampleEntry {
            id: s.id.clone(),
            image: s.image_path.clone(),
            keypoints2d: s.keypoints.iter().map(|(k, p)| (k.clone(), [p.x, p.y])).collect(),
            view: ViewEntry::from(&s.view),
            cad_id: s.cad_id,
        };
        entries.push(serde_json::to_value(entry)?);
    }
    let manifest = Manifest {
        class: catalog.class.clone(),
        cads,
        samples: entries,
    };
    fs::write(root.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}
