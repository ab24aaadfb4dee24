use std::collections::{BTreeMap, BTreeSet};

use image::{RgbImage, RgbaImage};
use nalgebra::Point2;

use crate::geometry::{ImageSize, KeypointSet2D};
use crate::imaging::transparent_canvas;

use super::{crop_patch, estimate_homography, warp_patch, Homography, PatchSpec, Polygon, WarpError};

/// Names of patches considered visible at some viewpoint.
pub type VisibleSet = BTreeSet<String>;

#[derive(Debug, Clone, PartialEq)]
pub enum PatchStatus {
    Active,
    /// Dropped by the visibility model.
    Occluded,
    /// Dropped because its geometry could not be used.
    Degenerate(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub name: String,
    /// Convex hull of the patch keypoints in the source image (pixels).
    pub source_polygon: Option<Polygon>,
    /// Polygon the content currently occupies (pixels).
    pub polygon: Option<Polygon>,
    /// Source -> current mapping, when the patch has been warped.
    pub homography: Option<Homography>,
    pub status: PatchStatus,
    /// Set when the content was transferred from the mirror partner.
    pub mirrored_from: Option<String>,
    /// Full-frame RGBA layer; alpha is polygon coverage.
    pub content: RgbaImage,
}

impl Patch {
    pub fn is_active(&self) -> bool {
        self.status == PatchStatus::Active
    }

    pub fn is_degenerate(&self) -> bool {
        matches!(self.status, PatchStatus::Degenerate(_))
    }

    fn drop_as(&mut self, status: PatchStatus, size: ImageSize) {
        self.status = status;
        self.content = transparent_canvas(size);
    }
}

/// Per-image set of planar patches, keyed (and composited) by name.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    size: ImageSize,
    patches: BTreeMap<String, Patch>,
}

impl PatchSet {
    pub fn empty(size: ImageSize) -> Self {
        Self {
            size,
            patches: BTreeMap::new(),
        }
    }

    pub fn size(&self) -> ImageSize {
        self.size
    }

    pub fn get(&self, name: &str) -> Option<&Patch> {
        self.patches.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Patch> {
        self.patches.get_mut(name)
    }

    pub fn insert(&mut self, patch: Patch) {
        self.patches.insert(patch.name.clone(), patch);
    }

    /// Patches in lexicographic name order.
    pub fn iter(&self) -> impl Iterator<Item = &Patch> {
        self.patches.values()
    }

    pub fn len(&self) -> usize {
        self.patches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }

    pub fn active_names(&self) -> Vec<String> {
        self.iter().filter(|p| p.is_active()).map(|p| p.name.clone()).collect()
    }

    /// Names of every patch that is not active, sorted.
    pub fn dropped_names(&self) -> Vec<String> {
        self.iter().filter(|p| !p.is_active()).map(|p| p.name.clone()).collect()
    }

    pub fn degenerate_count(&self) -> usize {
        self.iter().filter(|p| p.is_degenerate()).count()
    }

    /// Fills active patches with their source crops from `image`.
    pub fn with_source(mut self, image: &RgbImage) -> Result<Self, WarpError> {
        if image.width() != self.size.width || image.height() != self.size.height {
            return Err(WarpError::SizeMismatch {
                expected: self.size,
                actual: ImageSize {
                    width: image.width(),
                    height: image.height(),
                },
            });
        }
        for patch in self.patches.values_mut() {
            if let (true, Some(poly)) = (patch.is_active(), &patch.source_polygon) {
                patch.content = crop_patch(image, poly);
            }
        }
        Ok(self)
    }

    /// Drops every active patch whose name is not in `visible`.
    pub fn retain_visible(mut self, visible: &VisibleSet) -> Self {
        let size = self.size;
        for patch in self.patches.values_mut() {
            if patch.is_active() && !visible.contains(&patch.name) {
                patch.drop_as(PatchStatus::Occluded, size);
            }
        }
        self
    }
}

fn lookup_px(
    kps: &KeypointSet2D,
    names: &[String],
    size: ImageSize,
    missing: &mut BTreeSet<String>,
) -> Vec<Point2<f64>> {
    names
        .iter()
        .filter_map(|n| match kps.get(n) {
            Some(p) => Some(Point2::new(p.x * size.width as f64, p.y * size.height as f64)),
            None => {
                missing.insert(n.clone());
                None
            }
        })
        .collect()
}

fn check_complete(kps: &KeypointSet2D, spec: &PatchSpec) -> Result<(), WarpError> {
    let missing: Vec<String> = spec
        .keypoint_names()
        .into_iter()
        .filter(|n| kps.get(n).is_none())
        .map(str::to_owned)
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(WarpError::MissingKeypoints(missing))
    }
}

/// Source polygons of every patch: the convex hull of its keypoints in pixel
/// coordinates. Hulls with fewer than three non-collinear vertices are
/// flagged degenerate. Content is left transparent; see [`PatchSet::with_source`].
pub fn extract_patches(kps: &KeypointSet2D, spec: &PatchSpec, size: ImageSize) -> Result<PatchSet, WarpError> {
    check_complete(kps, spec)?;
    let mut set = PatchSet::empty(size);
    let mut missing = BTreeSet::new();
    for (name, names) in spec.patches() {
        let pts = lookup_px(kps, names, size, &mut missing);
        let finite = pts.iter().all(|p| p.x.is_finite() && p.y.is_finite());
        let polygon = if finite { Polygon::hull(&pts) } else { None };
        let status = match &polygon {
            Some(_) => PatchStatus::Active,
            None => PatchStatus::Degenerate("keypoints do not span a polygon".into()),
        };
        set.insert(Patch {
            name: name.clone(),
            source_polygon: polygon.clone(),
            polygon,
            homography: None,
            status,
            mirrored_from: None,
            content: transparent_canvas(size),
        });
    }
    Ok(set)
}

/// Warps one active patch along the given correspondences. The destination
/// region is the convex hull of the destination points.
fn warp_one(
    content: &RgbaImage,
    src_polygon: &Polygon,
    src_pts: &[Point2<f64>],
    dst_pts: &[Point2<f64>],
    size: ImageSize,
) -> Result<(Homography, Polygon, RgbaImage), String> {
    let h = estimate_homography(src_pts, dst_pts).map_err(|e| e.to_string())?;
    let dst_polygon = Polygon::hull(dst_pts).ok_or_else(|| "destination keypoints do not span a polygon".to_string())?;
    let warped = warp_patch(content, src_polygon, &dst_polygon, &h, size).map_err(|e| e.to_string())?;
    if warped.pixels().all(|p| p[3] == 0) && covers_pixel(&dst_polygon, size) {
        return Err("warp produced no pixels".into());
    }
    Ok((h, dst_polygon, warped))
}

fn covers_pixel(poly: &Polygon, size: ImageSize) -> bool {
    let Some((x0, y0, x1, y1)) = poly.pixel_bounds(size.width, size.height) else {
        return false;
    };
    (y0..=y1).any(|y| (x0..=x1).any(|x| poly.contains(&Point2::new(x as f64 + 0.5, y as f64 + 0.5))))
}

/// Warps every active patch to the destination keypoints. Each patch gets its
/// own homography fitted on its keypoint correspondences; a patch whose fit
/// or warped outline is degenerate is dropped without affecting the others.
pub fn warp_to_view(
    patches: &PatchSet,
    kps_src: &KeypointSet2D,
    kps_dst: &KeypointSet2D,
    spec: &PatchSpec,
) -> Result<PatchSet, WarpError> {
    check_complete(kps_src, spec)?;
    check_complete(kps_dst, spec)?;
    let size = patches.size();
    let mut out = PatchSet::empty(size);
    let mut missing = BTreeSet::new();
    for patch in patches.iter() {
        let mut next = patch.clone();
        if !patch.is_active() {
            out.insert(next);
            continue;
        }
        let Some(names) = spec.keypoints_of(&patch.name) else {
            next.drop_as(PatchStatus::Degenerate("patch not in spec".into()), size);
            out.insert(next);
            continue;
        };
        let current = patch.polygon.as_ref().or(patch.source_polygon.as_ref());
        let Some(src_polygon) = current else {
            next.drop_as(PatchStatus::Degenerate("no polygon".into()), size);
            out.insert(next);
            continue;
        };
        let src_pts = lookup_px(kps_src, names, size, &mut missing);
        let dst_pts = lookup_px(kps_dst, names, size, &mut missing);
        match warp_one(&patch.content, src_polygon, &src_pts, &dst_pts, size) {
            Ok((h, poly, content)) => {
                next.homography = Some(h);
                next.polygon = Some(poly);
                next.content = content;
            }
            Err(reason) => {
                log::debug!("patch {} degenerate: {reason}", patch.name);
                next.drop_as(PatchStatus::Degenerate(reason), size);
            }
        }
        out.insert(next);
    }
    Ok(out)
}

/// Warps source patches to an intermediate view and back again, so the
/// result carries the same resampling losses as a real novel-view warp.
/// Patches not visible at the source or at the intermediate view are dropped.
pub fn dewarp_roundtrip(
    image: &RgbImage,
    kps_src: &KeypointSet2D,
    kps_mid: &KeypointSet2D,
    spec: &PatchSpec,
    visible_src: &VisibleSet,
    visible_mid: &VisibleSet,
) -> Result<PatchSet, WarpError> {
    let size = ImageSize {
        width: image.width(),
        height: image.height(),
    };
    let source = extract_patches(kps_src, spec, size)?
        .with_source(image)?
        .retain_visible(visible_src);
    let mid = warp_to_view(&source, kps_src, kps_mid, spec)?.retain_visible(visible_mid);

    let mut out = PatchSet::empty(size);
    for patch in mid.iter() {
        let mut back = patch.clone();
        back.polygon = patch.source_polygon.clone();
        if patch.is_active() {
            let result = match (&patch.homography, &patch.polygon, &patch.source_polygon) {
                (Some(h), Some(mid_poly), Some(src_poly)) => h
                    .inverse()
                    .and_then(|inv| warp_patch(&patch.content, mid_poly, src_poly, &inv, size))
                    .map_err(|e| e.to_string()),
                _ => Err("missing warp state".to_string()),
            };
            match result {
                Ok(content) => back.content = content,
                Err(reason) => back.drop_as(PatchStatus::Degenerate(reason), size),
            }
        }
        out.insert(back);
    }
    Ok(out)
}

/// Fills patches that are required at the destination but missing (not
/// visible at the source) with the content of their mirror partner.
///
/// The partner's source crop is warped with a homography fitted from the
/// mirrored source keypoints to the patch's destination keypoints, which
/// flips the texture horizontally. Patches whose partner is unavailable
/// stay dropped. Patches that are already active are left untouched.
#[allow(clippy::too_many_arguments)]
pub fn symmetry_transfer(
    source: &PatchSet,
    warped: &PatchSet,
    kps_src: &KeypointSet2D,
    kps_dst: &KeypointSet2D,
    visible_src: &VisibleSet,
    visible_dst: &VisibleSet,
    spec: &PatchSpec,
) -> Result<PatchSet, WarpError> {
    check_complete(kps_src, spec)?;
    check_complete(kps_dst, spec)?;
    let size = warped.size();
    let mut out = warped.clone();
    let mut missing = BTreeSet::new();
    for (name, names) in spec.patches() {
        let required = visible_dst.contains(name);
        let have = out.get(name).is_some_and(Patch::is_active);
        if !required || have || visible_src.contains(name) {
            continue;
        }
        let Some(partner) = spec.mirror_of(name).filter(|p| *p != name) else {
            continue;
        };
        let Some(src_patch) = source.get(partner) else {
            continue;
        };
        if !src_patch.is_active() || !visible_src.contains(partner) {
            continue;
        }
        let Some(src_polygon) = &src_patch.source_polygon else {
            continue;
        };
        let mirrored: Vec<String> = names.iter().map(|k| spec.mirror_keypoint(k).to_owned()).collect();
        let src_pts = lookup_px(kps_src, &mirrored, size, &mut missing);
        let dst_pts = lookup_px(kps_dst, names, size, &mut missing);
        if src_pts.len() != dst_pts.len() {
            continue;
        }
        match warp_one(&src_patch.content, src_polygon, &src_pts, &dst_pts, size) {
            Ok((h, poly, content)) => {
                out.insert(Patch {
                    name: name.clone(),
                    source_polygon: Some(src_polygon.clone()),
                    polygon: Some(poly),
                    homography: Some(h),
                    status: PatchStatus::Active,
                    mirrored_from: Some(partner.to_owned()),
                    content,
                });
            }
            Err(reason) => log::debug!("mirror fill of {name} from {partner} failed: {reason}"),
        }
    }
    Ok(out)
}
