//! Triangle meshes, z-buffer rasterization, normal sketches and patch
//! visibility.

mod mesh;
pub mod primitives;
mod render;
mod visibility;

pub use mesh::{Mesh, MeshError};
pub use render::{decode_normal, encode_normal, rasterize, rasterize_faces, render_sketch, RenderBuffers, SketchImage};
pub use visibility::{
    patch_surface_samples, patch_visibility, patch_visibility_with, PatchVisibility, VisibilityConfig,
    VisibilityReport,
};
