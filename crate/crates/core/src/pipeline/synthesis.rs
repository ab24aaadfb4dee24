use std::time::{Duration, Instant};

use image::RgbImage;
use nalgebra::Point2;
use serde::Serialize;

use crate::dataset::{AnnotatedSample, CadModel};
use crate::geometry::{ImageSize, Intrinsics, KeypointSet2D, KeypointSet3D, Viewpoint};
use crate::imaging::image_size_of;
use crate::raster::{patch_visibility_with, rasterize, render_sketch, VisibilityConfig, VisibilityReport};
use crate::warp::{extract_patches, symmetry_transfer, warp_to_view, PatchSet, PatchSpec};

use super::{appearance_prior, assemble_input, CompletionBackend, IcnInput, PipelineError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SynthesisOptions {
    pub visibility: VisibilityConfig,
    /// Fill patches hidden in the source from their mirror partner.
    pub symmetry: bool,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            visibility: VisibilityConfig::default(),
            symmetry: true,
        }
    }
}

/// Wall-clock time spent in each stage of one render.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimings {
    #[serde(serialize_with = "as_ms")]
    pub visibility: Duration,
    #[serde(serialize_with = "as_ms")]
    pub warp: Duration,
    #[serde(serialize_with = "as_ms")]
    pub sketch: Duration,
    #[serde(serialize_with = "as_ms")]
    pub complete: Duration,
    #[serde(serialize_with = "as_ms")]
    pub total: Duration,
}

fn as_ms<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64() * 1e3)
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub image: RgbImage,
    pub input: IcnInput,
    /// Patch layers at the target view, including dropped ones.
    pub patches: PatchSet,
    pub target_keypoints: KeypointSet2D,
    pub source_visibility: VisibilityReport,
    pub target_visibility: VisibilityReport,
    pub timings: StageTimings,
}

/// Normalized projections of `keypoints`. Points at or behind the camera
/// get NaN coordinates, which degrades exactly the patches that use them.
pub fn project_keypoints(keypoints: &KeypointSet3D, view: &Viewpoint, k: &Intrinsics, size: ImageSize) -> KeypointSet2D {
    keypoints
        .0
        .iter()
        .map(|(name, p)| {
            let q = k
                .project(&view.transform_point(p))
                .map(|px| Point2::new(px.x / size.width as f64, px.y / size.height as f64))
                .unwrap_or(Point2::new(f64::NAN, f64::NAN));
            (name.clone(), q)
        })
        .collect()
}

/// Renders `sample` from `target` using `cad` for geometry.
///
/// Source patches visible at the sample's own viewpoint are warped to the
/// projections of the CAD keypoints at `target`, patches not visible there
/// are dropped, missing ones are optionally filled by symmetry, and the
/// backend completes the image over the target sketch. Passing another
/// CAD than the sample's own performs shape transfer.
pub fn synthesize_view(
    sample: &AnnotatedSample,
    target: &Viewpoint,
    cad: &CadModel,
    spec: &PatchSpec,
    backend: &dyn CompletionBackend,
    options: &SynthesisOptions,
) -> Result<Synthesis, PipelineError> {
    let start = Instant::now();
    let image = &sample.image;
    let size = image_size_of(image);
    let k = Intrinsics::for_size(size);
    let source_view = sample.view.viewpoint()?;

    let t = Instant::now();
    let source_buffers = rasterize(&cad.mesh, &source_view, &k, size);
    let vis_src = patch_visibility_with(&source_buffers, &cad.mesh, &cad.keypoints, spec, &source_view, &k, &options.visibility);
    let target_buffers = rasterize(&cad.mesh, target, &k, size);
    let vis_dst = patch_visibility_with(&target_buffers, &cad.mesh, &cad.keypoints, spec, target, &k, &options.visibility);
    let visibility = t.elapsed();

    let t = Instant::now();
    let kps_dst = project_keypoints(&cad.keypoints, target, &k, size);
    let visible_src = vis_src.visible_set();
    let visible_dst = vis_dst.visible_set();
    let source = extract_patches(&sample.keypoints, spec, size)?
        .with_source(image)?
        .retain_visible(&visible_src);
    let mut warped = warp_to_view(&source, &sample.keypoints, &kps_dst, spec)?.retain_visible(&visible_dst);
    if options.symmetry {
        warped = symmetry_transfer(&source, &warped, &sample.keypoints, &kps_dst, &visible_src, &visible_dst, spec)?;
    }
    let warp = t.elapsed();

    let t = Instant::now();
    let sketch = render_sketch(&target_buffers);
    let sketch_time = t.elapsed();

    let t = Instant::now();
    let prior = appearance_prior(image)?;
    let input = assemble_input(&warped, sketch, prior)?;
    let out = backend.complete(&input)?;
    let complete = t.elapsed();

    Ok(Synthesis {
        image: out,
        input,
        patches: warped,
        target_keypoints: kps_dst,
        source_visibility: vis_src,
        target_visibility: vis_dst,
        timings: StageTimings {
            visibility,
            warp,
            sketch: sketch_time,
            complete,
            total: start.elapsed(),
        },
    })
}
