//! Per-patch visibility from a rendered depth buffer.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Matrix3, Point2, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{ImageSize, Intrinsics, KeypointSet3D, Viewpoint};
use crate::warp::{convex_hull_indices, PatchSpec};

use super::{rasterize, Mesh, RenderBuffers};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityConfig {
    /// A patch is visible when at least this fraction of its area is.
    pub threshold: f64,
    /// Lattice subdivisions per fan triangle; each yields `n * n` samples.
    pub subdivisions: usize,
    /// Depth slack as a fraction of the keypoints' bounding-box diagonal.
    pub depth_tolerance: f64,
}

impl Default for VisibilityConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            subdivisions: 8,
            depth_tolerance: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchVisibility {
    /// Area-weighted fraction of the patch surface seen by the camera.
    pub fraction: f64,
    pub visible: bool,
    /// Keypoints did not span a surface; `fraction` is 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VisibilityReport {
    pub patches: BTreeMap<String, PatchVisibility>,
}

impl VisibilityReport {
    pub fn visible_set(&self) -> BTreeSet<String> {
        self.patches
            .iter()
            .filter(|(_, v)| v.visible)
            .map(|(k, _)| k.clone())
            .collect()
    }

    pub fn fraction(&self, patch: &str) -> Option<f64> {
        self.patches.get(patch).map(|v| v.fraction)
    }

    pub fn is_visible(&self, patch: &str) -> bool {
        self.patches.get(patch).is_some_and(|v| v.visible)
    }
}

/// Area-weighted sample points covering the planar polygon spanned by
/// `points`: the points are fitted with a plane, their convex hull in that
/// plane is fan-triangulated from its centroid and each triangle carries
/// `n * n` lattice points. Weights sum to 1. `None` when the points do not
/// span a polygon.
pub fn patch_surface_samples(points: &[Point3<f64>], subdivisions: usize) -> Option<Vec<(Point3<f64>, f64)>> {
    if points.len() < 3 || subdivisions == 0 {
        return None;
    }
    let n = points.len() as f64;
    let c = points.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - c;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let e0: Vector3<f64> = eig.eigenvectors.column(order[0]).into();
    let e1: Vector3<f64> = eig.eigenvectors.column(order[1]).into();
    let planar: Vec<Point2<f64>> = points
        .iter()
        .map(|p| Point2::new((p.coords - c).dot(&e0), (p.coords - c).dot(&e1)))
        .collect();
    let hull = convex_hull_indices(&planar);
    if hull.len() < 3 {
        return None;
    }
    let ring: Vec<Point3<f64>> = hull.iter().map(|&i| points[i]).collect();
    let center = Point3::from(ring.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / ring.len() as f64);

    let mut samples = Vec::new();
    let mut total_area = 0.0;
    let k = subdivisions;
    let inv = 1.0 / k as f64;
    for i in 0..ring.len() {
        let a = center;
        let b = ring[i];
        let cc = ring[(i + 1) % ring.len()];
        let area = 0.5 * (b - a).cross(&(cc - a)).norm();
        if area <= 0.0 {
            continue;
        }
        total_area += area;
        let w = area / (k * k) as f64;
        let at = |u: f64, v: f64| a + (b - a) * u + (cc - a) * v;
        for s in 0..k {
            for t in 0..k - s {
                let (sf, tf) = (s as f64, t as f64);
                samples.push((at((sf + 1.0 / 3.0) * inv, (tf + 1.0 / 3.0) * inv), w));
                if s + t + 1 < k {
                    samples.push((at((sf + 2.0 / 3.0) * inv, (tf + 2.0 / 3.0) * inv), w));
                }
            }
        }
    }
    let scale = points.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
    if total_area.is_nan() || total_area <= 1e-9 * scale * scale {
        return None;
    }
    for s in &mut samples {
        s.1 /= total_area;
    }
    Some(samples)
}

/// Depth of the rendered surface along the ray through `px`: the winning
/// face's depth on that exact ray when the ray hits it, the pixel's buffer
/// depth otherwise. `None` for empty pixels.
fn surface_depth(
    buffers: &RenderBuffers,
    mesh: &Mesh,
    view: &Viewpoint,
    k: &Intrinsics,
    px: &Point2<f64>,
) -> Option<f64> {
    let (x, y) = (px.x.floor() as u32, px.y.floor() as u32);
    let face = buffers.face_id(x, y);
    if face < 0 {
        return None;
    }
    let [a, b, c] = mesh.triangle(face as usize).map(|p| view.transform_point(&p));
    let n = (b - a).cross(&(c - a));
    let ray = k.ray(px);
    let denom = n.dot(&ray);
    let z = n.dot(&a.coords) / denom;
    if denom.abs() < 1e-12 * n.norm() || !z.is_finite() {
        return Some(buffers.depth(x, y));
    }
    let hit = ray * z;
    let eps = -1e-9 * n.norm_squared();
    let inside = [(a, b), (b, c), (c, a)]
        .iter()
        .all(|(p, q)| (q - p).cross(&(hit - p.coords)).dot(&n) >= eps);
    Some(if inside { z } else { buffers.depth(x, y) })
}

/// Visibility of every patch of `spec` whose keypoints lie on `mesh`.
pub fn patch_visibility(
    mesh: &Mesh,
    keypoints: &KeypointSet3D,
    spec: &PatchSpec,
    view: &Viewpoint,
    k: &Intrinsics,
    size: ImageSize,
    config: &VisibilityConfig,
) -> VisibilityReport {
    let buffers = rasterize(mesh, view, k, size);
    patch_visibility_with(&buffers, mesh, keypoints, spec, view, k, config)
}

/// Same as [`patch_visibility`] with an already rendered buffer.
pub fn patch_visibility_with(
    buffers: &RenderBuffers,
    mesh: &Mesh,
    keypoints: &KeypointSet3D,
    spec: &PatchSpec,
    view: &Viewpoint,
    k: &Intrinsics,
    config: &VisibilityConfig,
) -> VisibilityReport {
    let size = buffers.size();
    let extent = match keypoints.bounding_diagonal() {
        d if d > 0.0 => d,
        _ => mesh.bounding_diagonal(),
    };
    let tol = config.depth_tolerance * extent;
    let mut report = VisibilityReport::default();
    for (name, kp_names) in spec.patches() {
        let points: Option<Vec<Point3<f64>>> = kp_names.iter().map(|n| keypoints.get(n).copied()).collect();
        let samples = points.and_then(|p| patch_surface_samples(&p, config.subdivisions));
        let Some(samples) = samples else {
            report.patches.insert(
                name.clone(),
                PatchVisibility {
                    fraction: 0.0,
                    visible: false,
                    degenerate: true,
                },
            );
            continue;
        };
        let mut fraction = 0.0;
        for (p, w) in &samples {
            let cam = view.transform_point(p);
            let Some(px) = k.project(&cam) else { continue };
            if !(px.x >= 0.0 && px.y >= 0.0 && px.x < size.width as f64 && px.y < size.height as f64) {
                continue;
            }
            let seen = match surface_depth(buffers, mesh, view, k, &px) {
                None => true,
                Some(z) => cam.z <= z + tol,
            };
            if seen {
                fraction += w;
            }
        }
        let fraction = fraction.clamp(0.0, 1.0);
        report.patches.insert(
            name.clone(),
            PatchVisibility {
                fraction,
                visible: fraction >= config.threshold,
                degenerate: false,
            },
        );
    }
    report
}
