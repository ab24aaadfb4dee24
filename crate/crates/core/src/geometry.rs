//! Camera and viewpoint math: rigid transforms, orbit (spherical) poses and
//! pinhole projection of named keypoints.
//!
//! Conventions:
//! - world frame is right-handed with +z up; objects sit at the origin.
//! - camera frame follows the usual vision layout: +x right, +y down, +z
//!   along the optical axis. Depth is the camera-frame z coordinate.
//! - pixel `(i, j)` covers `[i, i+1) x [j, j+1)`, so its center is at
//!   `(i + 0.5, j + 0.5)` and the image center of a `W x H` image is
//!   `(W/2, H/2)`.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Matrix4, Point2, Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Focal length in pixels at the reference working resolution.
pub const DEFAULT_FOCAL: f64 = 3000.0;

/// Working resolution the default focal is expressed at.
pub const REFERENCE_SIZE: u32 = 128;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("radius must be finite and > 0, got {0}")]
    InvalidRadius(f64),
    #[error("angles must be finite (azimuth {azimuth}, elevation {elevation})")]
    NonFiniteAngle { azimuth: f64, elevation: f64 },
    #[error("elevation {0} deg outside [-90, 90]")]
    ElevationOutOfRange(f64),
    #[error("up vector is (nearly) parallel to the viewing direction")]
    DegenerateUp,
    #[error("matrix is not a rigid transform: {0}")]
    NotRigid(String),
    #[error("keypoints behind the camera (non-positive depth): {}", .0.join(", "))]
    BehindCamera(Vec<String>),
    #[error("focal length must be > 0, got {0}")]
    InvalidFocal(f64),
}

/// Rigid world-to-camera transform: `x_cam = rotation * x_world + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewpoint {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Viewpoint {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a viewpoint from a rotation and translation, checking orthonormality.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        check_rotation(&rotation)?;
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NotRigid("non-finite translation".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Skips the orthonormality check. Callers guarantee a proper rotation.
    pub(crate) fn from_parts_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Point3<f64> {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }

    pub fn transform_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Viewpoint) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Homogeneous 4x4 world-to-camera matrix.
    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Reads a homogeneous world-to-camera matrix. The bottom row must be `[0 0 0 1]`.
    pub fn from_matrix(m: &Matrix4<f64>) -> Result<Self, GeometryError> {
        let bottom = m.fixed_view::<1, 4>(3, 0);
        if (bottom[0].abs() + bottom[1].abs() + bottom[2].abs()) > 1e-9 || (bottom[3] - 1.0).abs() > 1e-9 {
            return Err(GeometryError::NotRigid("bottom row must be [0, 0, 0, 1]".into()));
        }
        Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    /// Camera pose (camera-to-world), the form used by orbit-style pose annotations.
    pub fn to_pose_matrix(&self) -> Matrix4<f64> {
        self.inverse().to_matrix()
    }

    pub fn from_pose_matrix(m: &Matrix4<f64>) -> Result<Self, GeometryError> {
        Ok(Self::from_matrix(m)?.inverse())
    }
}

fn check_rotation(r: &Matrix3<f64>) -> Result<(), GeometryError> {
    if !r.iter().all(|v| v.is_finite()) {
        return Err(GeometryError::NotRigid("non-finite rotation".into()));
    }
    let err = (r.transpose() * r - Matrix3::identity()).abs().max();
    if err > 1e-9 {
        return Err(GeometryError::NotRigid(format!("R^T R deviates from I by {err:e}")));
    }
    let det = r.determinant();
    if (det - 1.0).abs() > 1e-9 {
        return Err(GeometryError::NotRigid(format!("det(R) = {det}")));
    }
    Ok(())
}

/// Orbit pose around a target point. Azimuth is stored modulo 360.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSphericalPose", into = "RawSphericalPose")]
pub struct SphericalPose {
    azimuth_deg: f64,
    elevation_deg: f64,
    radius: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSphericalPose {
    azimuth_deg: f64,
    elevation_deg: f64,
    radius: f64,
}

impl TryFrom<RawSphericalPose> for SphericalPose {
    type Error = GeometryError;
    fn try_from(raw: RawSphericalPose) -> Result<Self, Self::Error> {
        SphericalPose::new(raw.azimuth_deg, raw.elevation_deg, raw.radius)
    }
}

impl From<SphericalPose> for RawSphericalPose {
    fn from(p: SphericalPose) -> Self {
        RawSphericalPose {
            azimuth_deg: p.azimuth_deg,
            elevation_deg: p.elevation_deg,
            radius: p.radius,
        }
    }
}

impl SphericalPose {
    pub fn new(azimuth_deg: f64, elevation_deg: f64, radius: f64) -> Result<Self, GeometryError> {
        if !azimuth_deg.is_finite() || !elevation_deg.is_finite() {
            return Err(GeometryError::NonFiniteAngle {
                azimuth: azimuth_deg,
                elevation: elevation_deg,
            });
        }
        if !(-90.0..=90.0).contains(&elevation_deg) {
            return Err(GeometryError::ElevationOutOfRange(elevation_deg));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeometryError::InvalidRadius(radius));
        }
        Ok(Self {
            azimuth_deg: normalize_azimuth(azimuth_deg),
            elevation_deg,
            radius,
        })
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth_deg
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation_deg
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Offset of the camera center from the orbit target (z-up).
    pub fn direction(&self) -> Vector3<f64> {
        let az = self.azimuth_deg.to_radians();
        let el = self.elevation_deg.to_radians();
        Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
    }

    /// Recovers the orbit pose of a camera center relative to `look_at`.
    pub fn from_center(center: &Point3<f64>, look_at: &Point3<f64>) -> Result<Self, GeometryError> {
        let d = center - look_at;
        let radius = d.norm();
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeometryError::InvalidRadius(radius));
        }
        let elevation = (d.z / radius).clamp(-1.0, 1.0).asin().to_degrees();
        let azimuth = d.y.atan2(d.x).to_degrees();
        Self::new(azimuth, elevation, radius)
    }
}

/// Maps any finite angle into `[0, 360)`.
pub fn normalize_azimuth(deg: f64) -> f64 {
    let a = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if a >= 360.0 {
        0.0
    } else {
        a
    }
}

/// Camera orbiting `look_at` at the given spherical pose, oriented so that
/// the optical axis points at `look_at` and `up` projects to image-up.
pub fn viewpoint_from_spherical(
    pose: &SphericalPose,
    look_at: &Point3<f64>,
    up: &Vector3<f64>,
) -> Result<Viewpoint, GeometryError> {
    let center = look_at + pose.direction() * pose.radius;
    look_at_viewpoint(&center, look_at, up)
}

/// Camera at `center` looking at `target`.
pub fn look_at_viewpoint(
    center: &Point3<f64>,
    target: &Point3<f64>,
    up: &Vector3<f64>,
) -> Result<Viewpoint, GeometryError> {
    let gaze = target - center;
    let gaze_norm = gaze.norm();
    if !(gaze_norm.is_finite() && gaze_norm > 0.0) {
        return Err(GeometryError::InvalidRadius(gaze_norm));
    }
    let forward = gaze / gaze_norm;
    let up_norm = up.norm();
    if !(up_norm.is_finite() && up_norm > 0.0) {
        return Err(GeometryError::DegenerateUp);
    }
    let right = forward.cross(&(up / up_norm));
    let right_norm = right.norm();
    if right_norm < 1e-9 {
        return Err(GeometryError::DegenerateUp);
    }
    let right = right / right_norm;
    let down = forward.cross(&right);
    let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    let translation = -(rotation * center.coords);
    Ok(Viewpoint::from_parts_unchecked(rotation, translation))
}

/// Rotation about the world z axis, handy for orbit tests.
pub fn rotation_about_z(deg: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), deg.to_radians()).into_inner()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

impl ImageSize {
    pub fn square(side: u32) -> Self {
        Self {
            width: side,
            height: side,
        }
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Pinhole intrinsics with square pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    focal: f64,
    principal_point: (f64, f64),
}

impl Intrinsics {
    pub fn new(focal: f64, cx: f64, cy: f64) -> Result<Self, GeometryError> {
        if !(focal.is_finite() && focal > 0.0) {
            return Err(GeometryError::InvalidFocal(focal));
        }
        Ok(Self {
            focal,
            principal_point: (cx, cy),
        })
    }

    /// Default camera for a square working resolution: focal 3000 px at
    /// 128 px, scaled linearly with the image side so normalized keypoints
    /// do not depend on the resolution. Principal point at the image center.
    pub fn for_size(size: ImageSize) -> Self {
        let scale = size.width as f64 / REFERENCE_SIZE as f64;
        Self {
            focal: DEFAULT_FOCAL * scale,
            principal_point: (size.width as f64 / 2.0, size.height as f64 / 2.0),
        }
    }

    pub fn focal(&self) -> f64 {
        self.focal
    }

    pub fn principal_point(&self) -> (f64, f64) {
        self.principal_point
    }

    /// Projects a camera-frame point; `None` for non-positive depth.
    pub fn project(&self, p_cam: &Point3<f64>) -> Option<Point2<f64>> {
        if p_cam.z.is_nan() || p_cam.z <= 0.0 {
            return None;
        }
        let (cx, cy) = self.principal_point;
        Some(Point2::new(
            self.focal * p_cam.x / p_cam.z + cx,
            self.focal * p_cam.y / p_cam.z + cy,
        ))
    }

    /// Camera-frame ray direction (z = 1) through a pixel-space point.
    pub fn ray(&self, px: &Point2<f64>) -> Vector3<f64> {
        let (cx, cy) = self.principal_point;
        Vector3::new((px.x - cx) / self.focal, (px.y - cy) / self.focal, 1.0)
    }
}

impl Default for Intrinsics {
    fn default() -> Self {
        Self::for_size(ImageSize::square(REFERENCE_SIZE))
    }
}

/// Named 3D keypoints in model coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KeypointSet3D(pub BTreeMap<String, Point3<f64>>);

/// Named 2D keypoints. At module boundaries coordinates are normalized to
/// `[0, 1]^2` by image width/height; see [`KeypointSet2D::to_pixels`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KeypointSet2D(pub BTreeMap<String, Point2<f64>>);

impl KeypointSet3D {
    pub fn get(&self, name: &str) -> Option<&Point3<f64>> {
        self.0.get(name)
    }

    pub fn insert(&mut self, name: impl Into<String>, p: Point3<f64>) {
        self.0.insert(name.into(), p);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn centroid(&self) -> Option<Point3<f64>> {
        if self.0.is_empty() {
            return None;
        }
        let sum = self.0.values().fold(Vector3::zeros(), |acc, p| acc + p.coords);
        Some(Point3::from(sum / self.0.len() as f64))
    }

    /// Diagonal of the axis-aligned bounding box; 0 when empty.
    pub fn bounding_diagonal(&self) -> f64 {
        let mut pts = self.0.values();
        let Some(first) = pts.next() else { return 0.0 };
        let (lo, hi) = pts.fold((first.coords, first.coords), |(lo, hi), p| (lo.inf(&p.coords), hi.sup(&p.coords)));
        (hi - lo).norm()
    }
}

impl FromIterator<(String, Point3<f64>)> for KeypointSet3D {
    fn from_iter<T: IntoIterator<Item = (String, Point3<f64>)>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl KeypointSet2D {
    pub fn get(&self, name: &str) -> Option<&Point2<f64>> {
        self.0.get(name)
    }

    pub fn insert(&mut self, name: impl Into<String>, p: Point2<f64>) {
        self.0.insert(name.into(), p);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Point2<f64>)> {
        self.0.iter()
    }

    /// Normalized -> pixel coordinates.
    pub fn to_pixels(&self, size: ImageSize) -> KeypointSet2D {
        self.scaled(size.width as f64, size.height as f64)
    }

    /// Pixel -> normalized coordinates.
    pub fn to_normalized(&self, size: ImageSize) -> KeypointSet2D {
        self.scaled(1.0 / size.width as f64, 1.0 / size.height as f64)
    }

    fn scaled(&self, sx: f64, sy: f64) -> KeypointSet2D {
        KeypointSet2D(
            self.0
                .iter()
                .map(|(k, p)| (k.clone(), Point2::new(p.x * sx, p.y * sy)))
                .collect(),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.0.values().all(|p| p.x.is_finite() && p.y.is_finite())
    }
}

impl FromIterator<(String, Point2<f64>)> for KeypointSet2D {
    fn from_iter<T: IntoIterator<Item = (String, Point2<f64>)>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Pinhole projection of named points into pixel coordinates.
pub fn project_points_px(
    points: &KeypointSet3D,
    view: &Viewpoint,
    k: &Intrinsics,
) -> Result<KeypointSet2D, GeometryError> {
    let mut out = BTreeMap::new();
    let mut behind = Vec::new();
    for (name, p) in &points.0 {
        match k.project(&view.transform_point(p)) {
            Some(px) => {
                out.insert(name.clone(), px);
            }
            None => behind.push(name.clone()),
        }
    }
    if !behind.is_empty() {
        return Err(GeometryError::BehindCamera(behind));
    }
    Ok(KeypointSet2D(out))
}

/// Pinhole projection normalized by the image size.
pub fn project_points(
    points: &KeypointSet3D,
    view: &Viewpoint,
    k: &Intrinsics,
    size: ImageSize,
) -> Result<KeypointSet2D, GeometryError> {
    Ok(project_points_px(points, view, k)?.to_normalized(size))
}

/// Default orbit: look at the origin with +z up.
pub fn orbit_viewpoint(pose: &SphericalPose) -> Result<Viewpoint, GeometryError> {
    viewpoint_from_spherical(pose, &Point3::origin(), &Vector3::z())
}
