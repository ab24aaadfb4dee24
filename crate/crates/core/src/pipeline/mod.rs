//! Completion-network inputs, the baseline completion backend, novel-view
//! synthesis and self-supervised training pairs.

mod synthesis;
mod training;

pub use synthesis::{project_keypoints, synthesize_view, StageTimings, Synthesis, SynthesisOptions};
pub use training::{
    derive_seed, emit_training_pair, write_training_pair, ColorSpace, PairManifest, TrainingOptions, TrainingPair,
};

use image::{Rgb, RgbImage, Rgba, RgbaImage};
use thiserror::Error;

use crate::geometry::{GeometryError, ImageSize};
use crate::imaging::{transparent_canvas, Mask, BACKGROUND};
use crate::raster::SketchImage;
use crate::warp::{PatchSet, WarpError};

/// Side of the appearance prior as a fraction of the image side.
pub const PRIOR_SIDE_FRACTION: f64 = 0.10;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("image must be square, got {0}x{1}")]
    NotSquare(u32, u32),
    #[error("image side {0} is too small for a prior crop")]
    ImageTooSmall(u32),
    #[error("plane sizes differ: {0:?} vs {1:?}")]
    DimensionMismatch(ImageSize, ImageSize),
    #[error("sample {id} is degenerate: {reason}")]
    DegenerateSample { id: String, reason: String },
    #[error("completion backend failed: {0}")]
    Backend(String),
    #[error(transparent)]
    Warp(#[from] WarpError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Centered square crop conveying the average appearance of the object.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorCrop {
    pub image: RgbImage,
    /// Top-left corner of the crop in the source image.
    pub offset: (u32, u32),
}

impl PriorCrop {
    pub fn side(&self) -> u32 {
        self.image.width()
    }

    /// Channel-wise mean, rounded to 8 bits.
    pub fn mean_color(&self) -> Rgb<u8> {
        let n = self.image.pixels().len().max(1) as u64;
        let mut sum = [0u64; 3];
        for p in self.image.pixels() {
            for c in 0..3 {
                sum[c] += p[c] as u64;
            }
        }
        Rgb(sum.map(|s| ((s + n / 2) / n) as u8))
    }
}

/// Centered crop of side `floor(0.1 * S)` at offset `floor((S - side) / 2)`.
pub fn appearance_prior(image: &RgbImage) -> Result<PriorCrop, PipelineError> {
    let (w, h) = image.dimensions();
    if w != h {
        return Err(PipelineError::NotSquare(w, h));
    }
    let side = (PRIOR_SIDE_FRACTION * w as f64).floor() as u32;
    if side == 0 {
        return Err(PipelineError::ImageTooSmall(w));
    }
    let off = (w - side) / 2;
    let crop = image::imageops::crop_imm(image, off, off, side, side).to_image();
    Ok(PriorCrop {
        image: crop,
        offset: (off, off),
    })
}

/// Everything a completion backend sees.
#[derive(Debug, Clone, PartialEq)]
pub struct IcnInput {
    pub patches: RgbaImage,
    pub sketch: SketchImage,
    pub prior: PriorCrop,
    pub silhouette: Mask,
}

impl IcnInput {
    pub fn size(&self) -> ImageSize {
        ImageSize {
            width: self.patches.width(),
            height: self.patches.height(),
        }
    }
}

/// Source-over compositing of all active patches in name order, so later
/// names cover earlier ones.
pub fn composite_patches(set: &PatchSet) -> RgbaImage {
    let size = set.size();
    let mut out = transparent_canvas(size);
    for patch in set.iter().filter(|p| p.is_active()) {
        for (dst, src) in out.pixels_mut().zip(patch.content.pixels()) {
            *dst = over(*src, *dst);
        }
    }
    out
}

fn over(src: Rgba<u8>, dst: Rgba<u8>) -> Rgba<u8> {
    match (src[3], dst[3]) {
        (0, _) => dst,
        (255, _) | (_, 0) => src,
        (sa, da) => {
            let sa = sa as f64 / 255.0;
            let da = da as f64 / 255.0;
            let oa = sa + da * (1.0 - sa);
            let ch = |c: usize| ((src[c] as f64 * sa + dst[c] as f64 * da * (1.0 - sa)) / oa).round() as u8;
            Rgba([ch(0), ch(1), ch(2), (oa * 255.0).round() as u8])
        }
    }
}

pub fn assemble_input(patches: &PatchSet, sketch: SketchImage, prior: PriorCrop) -> Result<IcnInput, PipelineError> {
    let size = patches.size();
    let sketch_size = sketch.size();
    if size != sketch_size {
        return Err(PipelineError::DimensionMismatch(size, sketch_size));
    }
    let silhouette = sketch.silhouette.clone();
    Ok(IcnInput {
        patches: composite_patches(patches),
        sketch,
        prior,
        silhouette,
    })
}

/// Fills the target view from an [`IcnInput`]. Implementations are shared
/// across threads and must not keep per-call state.
pub trait CompletionBackend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, input: &IcnInput) -> Result<RgbImage, PipelineError>;
}

/// Deterministic stand-in for a learned completion network.
#[derive(Debug, Clone, Copy, Default)]
pub struct BaselineBackend;

impl CompletionBackend for BaselineBackend {
    fn name(&self) -> &str {
        "baseline"
    }

    fn complete(&self, input: &IcnInput) -> Result<RgbImage, PipelineError> {
        Ok(baseline_complete(input))
    }
}

/// Inside the silhouette: patch pixels where present, the prior's mean
/// color elsewhere. Outside: [`BACKGROUND`].
pub fn baseline_complete(input: &IcnInput) -> RgbImage {
    let fill = input.prior.mean_color();
    let fill_rgba = Rgba([fill[0], fill[1], fill[2], 255]);
    let (w, h) = input.patches.dimensions();
    RgbImage::from_fn(w, h, |x, y| {
        if !input.silhouette.get(x, y) {
            return BACKGROUND;
        }
        let p = over(*input.patches.get_pixel(x, y), fill_rgba);
        Rgb([p[0], p[1], p[2]])
    })
}
