use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage, Rgba, RgbaImage};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{encode_lab8, rgb_to_lab, AnnotatedSample, CadModel, SamplerMode, ViewSpec, ViewpointSampler};
use crate::geometry::{orbit_viewpoint, Intrinsics, SphericalPose};
use crate::imaging::{image_size_of, BACKGROUND};
use crate::raster::{patch_visibility_with, rasterize, render_sketch, VisibilityConfig};
use crate::warp::{dewarp_roundtrip, symmetry_transfer, PatchSpec};

use super::{appearance_prior, assemble_input, project_keypoints, IcnInput, PipelineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    #[default]
    Rgb,
    /// CIELAB stored as `L * 255 / 100`, `a + 128`, `b + 128`.
    Lab,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOptions {
    pub sampler: SamplerMode,
    pub visibility: VisibilityConfig,
    /// Fill patches lost at the intermediate view from their mirror partner.
    pub symmetry: bool,
    /// Use this intermediate view instead of sampling one.
    pub mid_override: Option<SphericalPose>,
}

impl TrainingOptions {
    pub fn new(sampler: SamplerMode) -> Self {
        Self {
            sampler,
            visibility: VisibilityConfig::default(),
            symmetry: false,
            mid_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub sample_id: String,
    pub input: IcnInput,
    /// Source image with everything outside the silhouette set to background.
    pub target: RgbImage,
    pub src_view: ViewSpec,
    pub mid_view: SphericalPose,
    /// Sorted names of patches not present in the input.
    pub dropped_patches: Vec<String>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairManifest {
    pub sample_id: String,
    pub src_view: ViewSpec,
    pub mid_view: SphericalPose,
    pub dropped_patches: Vec<String>,
    pub seed: u64,
    pub color_space: ColorSpace,
}

/// Independent seed for item `index` of a batch run with `base`.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(index);
    rng.next_u64()
}

/// Builds one self-supervised pair: source patches are warped to a sampled
/// intermediate view and back, with visibility dropout at both ends, and the
/// target is the source image itself.
pub fn emit_training_pair(
    sample: &AnnotatedSample,
    cad: &CadModel,
    spec: &PatchSpec,
    seed: u64,
    options: &TrainingOptions,
) -> Result<TrainingPair, PipelineError> {
    let image = &sample.image;
    let size = image_size_of(image);
    let k = Intrinsics::for_size(size);
    let src_view = sample.view.viewpoint()?;

    let mid_pose = match options.mid_override {
        Some(p) => p,
        None => ViewpointSampler::new(options.sampler.clone(), seed).sample(),
    };
    let mid_view = orbit_viewpoint(&mid_pose)?;

    let src_buffers = rasterize(&cad.mesh, &src_view, &k, size);
    let vis_src = patch_visibility_with(&src_buffers, &cad.mesh, &cad.keypoints, spec, &src_view, &k, &options.visibility)
        .visible_set();
    let mid_buffers = rasterize(&cad.mesh, &mid_view, &k, size);
    let vis_mid = patch_visibility_with(&mid_buffers, &cad.mesh, &cad.keypoints, spec, &mid_view, &k, &options.visibility)
        .visible_set();
    let kps_mid = project_keypoints(&cad.keypoints, &mid_view, &k, size);

    let mut patches = dewarp_roundtrip(image, &sample.keypoints, &kps_mid, spec, &vis_src, &vis_mid)?;
    if options.symmetry {
        let survived: BTreeSet<String> = patches.active_names().into_iter().collect();
        let back = patches.clone();
        patches = symmetry_transfer(&back, &patches, &sample.keypoints, &sample.keypoints, &survived, &vis_src, spec)?;
    }

    let sketch = render_sketch(&src_buffers);
    if patches.active_names().is_empty() && sketch.silhouette.is_empty() {
        log::info!("skipping {}: no patch survived and the silhouette is empty", sample.id);
        return Err(PipelineError::DegenerateSample {
            id: sample.id.clone(),
            reason: "all patches dropped and empty silhouette".into(),
        });
    }
    let target = RgbImage::from_fn(size.width, size.height, |x, y| {
        if sketch.silhouette.get(x, y) {
            *image.get_pixel(x, y)
        } else {
            BACKGROUND
        }
    });
    let prior = appearance_prior(image)?;
    let dropped_patches = patches.dropped_names();
    let input = assemble_input(&patches, sketch, prior)?;
    Ok(TrainingPair {
        sample_id: sample.id.clone(),
        input,
        target,
        src_view: sample.view,
        mid_view: mid_pose,
        dropped_patches,
        seed,
    })
}

fn lab_rgba(img: &RgbaImage) -> RgbaImage {
    let rgb = RgbImage::from_fn(img.width(), img.height(), |x, y| {
        let p = img.get_pixel(x, y);
        Rgb([p[0], p[1], p[2]])
    });
    let lab = encode_lab8(&rgb_to_lab(&rgb));
    RgbaImage::from_fn(img.width(), img.height(), |x, y| {
        let l = lab.get_pixel(x, y);
        let a = img.get_pixel(x, y)[3];
        if a == 0 {
            Rgba([0, 0, 0, 0])
        } else {
            Rgba([l[0], l[1], l[2], a])
        }
    })
}

/// Writes `patches.png`, `sketch.png`, `prior.png`, `target.png`,
/// `mask.png` and `manifest.json` into `dir`. With [`ColorSpace::Lab`] the
/// color planes (patches, prior, target) are stored in 8-bit CIELAB.
pub fn write_training_pair(pair: &TrainingPair, dir: &Path, color_space: ColorSpace) -> Result<(), PipelineError> {
    fs::create_dir_all(dir)?;
    let png = image::ImageFormat::Png;
    match color_space {
        ColorSpace::Rgb => {
            pair.input.patches.save_with_format(dir.join("patches.png"), png)?;
            pair.input.prior.image.save_with_format(dir.join("prior.png"), png)?;
            pair.target.save_with_format(dir.join("target.png"), png)?;
        }
        ColorSpace::Lab => {
            lab_rgba(&pair.input.patches).save_with_format(dir.join("patches.png"), png)?;
            encode_lab8(&rgb_to_lab(&pair.input.prior.image)).save_with_format(dir.join("prior.png"), png)?;
            encode_lab8(&rgb_to_lab(&pair.target)).save_with_format(dir.join("target.png"), png)?;
        }
    }
    pair.input.sketch.image.save_with_format(dir.join("sketch.png"), png)?;
    pair.input.silhouette.to_gray().save_with_format(dir.join("mask.png"), png)?;
    let manifest = PairManifest {
        sample_id: pair.sample_id.clone(),
        src_view: pair.src_view,
        mid_view: pair.mid_view,
        dropped_patches: pair.dropped_patches.clone(),
        seed: pair.seed,
        color_space,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}
