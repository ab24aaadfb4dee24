use image::{Rgb, RgbImage};
use nalgebra::{Point2, Point3, Vector3};

use crate::geometry::{ImageSize, Intrinsics, Viewpoint};
use crate::imaging::{Mask, BACKGROUND};

use super::Mesh;

/// Camera-frame depths closer than this are treated as behind the camera.
const NEAR_PLANE: f64 = 1e-6;

/// Depth, normal and face-index buffers of one rendered view.
///
/// Normals are stored in the view frame used by normal maps: +x right,
/// +y up, +z toward the camera. A surface facing the camera head-on has
/// normal `(0, 0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderBuffers {
    size: ImageSize,
    depth: Vec<f64>,
    normals: Vec<Vector3<f64>>,
    face_id: Vec<i32>,
    culled_faces: usize,
    behind_camera: bool,
}

impl RenderBuffers {
    pub fn empty(size: ImageSize) -> Self {
        let n = size.pixel_count();
        Self {
            size,
            depth: vec![f64::INFINITY; n],
            normals: vec![Vector3::zeros(); n],
            face_id: vec![-1; n],
            culled_faces: 0,
            behind_camera: false,
        }
    }

    pub fn size(&self) -> ImageSize {
        self.size
    }

    fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.size.width as usize + x as usize
    }

    /// Camera-frame depth, `+inf` where nothing was drawn.
    pub fn depth(&self, x: u32, y: u32) -> f64 {
        self.depth[self.index(x, y)]
    }

    pub fn normal(&self, x: u32, y: u32) -> Vector3<f64> {
        self.normals[self.index(x, y)]
    }

    /// Winning face index, `-1` where nothing was drawn.
    pub fn face_id(&self, x: u32, y: u32) -> i32 {
        self.face_id[self.index(x, y)]
    }

    pub fn depth_slice(&self) -> &[f64] {
        &self.depth
    }

    pub fn face_slice(&self) -> &[i32] {
        &self.face_id
    }

    pub fn covered(&self, x: u32, y: u32) -> bool {
        self.face_id(x, y) >= 0
    }

    pub fn silhouette(&self) -> Mask {
        Mask::from_fn(self.size.width, self.size.height, |x, y| self.covered(x, y))
    }

    /// Number of faces skipped because a vertex was at or behind the camera.
    pub fn culled_faces(&self) -> usize {
        self.culled_faces
    }

    /// Set when the whole mesh was behind the camera.
    pub fn behind_camera(&self) -> bool {
        self.behind_camera
    }

    /// Per-pixel minimum of two renders of the same view (lower face id wins ties).
    pub fn merge_min(&self, other: &RenderBuffers) -> RenderBuffers {
        let mut out = self.clone();
        for i in 0..out.depth.len() {
            let (da, db) = (self.depth[i], other.depth[i]);
            let take_other = db < da || (db == da && other.face_id[i] >= 0 && other.face_id[i] < self.face_id[i]);
            if take_other {
                out.depth[i] = db;
                out.normals[i] = other.normals[i];
                out.face_id[i] = other.face_id[i];
            }
        }
        out
    }
}

#[inline]
fn edge(a: &Point2<f64>, b: &Point2<f64>, p: &Point2<f64>) -> f64 {
    (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)
}

/// Z-buffered rasterization of `mesh` seen from `view`.
///
/// A pixel is covered by a face when its center lies inside or on the
/// projected triangle. Depth is interpolated perspective-correctly (linear
/// in 1/z); the nearest face wins and exact ties go to the lowest face index.
/// Faces with any vertex at or behind the camera are skipped.
pub fn rasterize(mesh: &Mesh, view: &Viewpoint, k: &Intrinsics, size: ImageSize) -> RenderBuffers {
    rasterize_faces(mesh, view, k, size, 0..mesh.face_count())
}

/// Rasterizes only the listed faces (face ids are kept as mesh indices).
pub fn rasterize_faces(
    mesh: &Mesh,
    view: &Viewpoint,
    k: &Intrinsics,
    size: ImageSize,
    faces: impl IntoIterator<Item = usize>,
) -> RenderBuffers {
    let mut buf = RenderBuffers::empty(size);
    let cam: Vec<Point3<f64>> = mesh.vertices().iter().map(|v| view.transform_point(v)).collect();
    let w = size.width as usize;
    let mut drawn_any = false;
    let mut considered = 0usize;

    for fi in faces {
        considered += 1;
        let [ia, ib, ic] = mesh.faces()[fi].map(|i| i as usize);
        let tri = [cam[ia], cam[ib], cam[ic]];
        if tri.iter().any(|p| p.z <= NEAR_PLANE) {
            buf.culled_faces += 1;
            continue;
        }
        drawn_any = true;
        let s = tri.map(|p| k.project(&p).expect("depth checked above"));
        let area = edge(&s[0], &s[1], &s[2]);
        if area.abs() < 1e-12 {
            continue;
        }

        let mut n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0])).normalize();
        if n.dot(&tri[0].coords) > 0.0 {
            n = -n;
        }
        let n_view = Vector3::new(n.x, -n.y, -n.z);
        let inv_z = tri.map(|p| 1.0 / p.z);

        let min_x = s.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let max_x = s.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        let min_y = s.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let max_y = s.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
        let x0 = (min_x - 0.5).ceil().max(0.0);
        let x1 = (max_x - 0.5).floor().min(size.width as f64 - 1.0);
        let y0 = (min_y - 0.5).ceil().max(0.0);
        let y1 = (max_y - 0.5).floor().min(size.height as f64 - 1.0);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        let (x0, x1, y0, y1) = (x0 as usize, x1 as usize, y0 as usize, y1 as usize);
        let inv_area = 1.0 / area;

        for y in y0..=y1 {
            for x in x0..=x1 {
                let p = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
                let b0 = edge(&s[1], &s[2], &p) * inv_area;
                let b1 = edge(&s[2], &s[0], &p) * inv_area;
                let b2 = edge(&s[0], &s[1], &p) * inv_area;
                if b0 < 0.0 || b1 < 0.0 || b2 < 0.0 {
                    continue;
                }
                let z = 1.0 / (b0 * inv_z[0] + b1 * inv_z[1] + b2 * inv_z[2]);
                let idx = y * w + x;
                if z < buf.depth[idx] {
                    buf.depth[idx] = z;
                    buf.normals[idx] = n_view;
                    buf.face_id[idx] = fi as i32;
                }
            }
        }
    }
    if considered > 0 && !drawn_any {
        log::warn!("mesh is entirely behind the camera; returning empty buffers");
        buf.behind_camera = true;
    }
    buf
}

/// Normals encoded as 8-bit color plus the silhouette they cover.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchImage {
    pub image: RgbImage,
    pub silhouette: Mask,
}

impl SketchImage {
    pub fn size(&self) -> ImageSize {
        self.silhouette.size()
    }
}

/// `round(255 * (n + 1) / 2)` per channel.
pub fn encode_normal(n: &Vector3<f64>) -> Rgb<u8> {
    let q = |c: f64| (255.0 * (c + 1.0) / 2.0).round().clamp(0.0, 255.0) as u8;
    Rgb([q(n.x), q(n.y), q(n.z)])
}

/// Inverse of [`encode_normal`] before re-normalization.
pub fn decode_normal(px: &Rgb<u8>) -> Vector3<f64> {
    let d = |c: u8| c as f64 / 255.0 * 2.0 - 1.0;
    Vector3::new(d(px[0]), d(px[1]), d(px[2]))
}

/// 2.5D sketch: encoded normals over a white background.
pub fn render_sketch(buffers: &RenderBuffers) -> SketchImage {
    let size = buffers.size();
    let image = RgbImage::from_fn(size.width, size.height, |x, y| {
        if buffers.covered(x, y) {
            encode_normal(&buffers.normal(x, y))
        } else {
            BACKGROUND
        }
    });
    SketchImage {
        image,
        silhouette: buffers.silhouette(),
    }
}
