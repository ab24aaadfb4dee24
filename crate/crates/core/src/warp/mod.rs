//! Planar patches: extraction from keypoints, homography fitting, inverse
//! warping, the warp/dewarp round trip and mirror transfer.

mod homography;
mod patches;
mod polygon;
mod resample;
mod spec;

pub use homography::{estimate_homography, symmetric_transfer_error, Homography, HomographyError};
pub use patches::{
    dewarp_roundtrip, extract_patches, symmetry_transfer, warp_to_view, Patch, PatchSet, PatchStatus, VisibleSet,
};
pub use polygon::{convex_hull_indices, Polygon};
pub use resample::{crop_patch, warp_patch};
pub use spec::{class_keypoints, PatchSpec, SpecError, CAR_KEYPOINTS, CHAIR_KEYPOINTS};

use thiserror::Error;

use crate::geometry::ImageSize;

#[derive(Debug, Error)]
pub enum WarpError {
    #[error("missing keypoints: {}", .0.join(", "))]
    MissingKeypoints(Vec<String>),
    #[error("image is {actual:?}, patch set expects {expected:?}")]
    SizeMismatch { expected: ImageSize, actual: ImageSize },
    #[error(transparent)]
    Homography(#[from] HomographyError),
}
