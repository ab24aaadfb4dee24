//! Semi-parametric novel-view synthesis: planar patches of an annotated
//! photo are warped to a target viewpoint, combined with a rendered normal
//! sketch of a proxy mesh and handed to a completion backend.

pub mod dataset;
pub mod geometry;
pub mod imaging;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod toy;
pub mod warp;
