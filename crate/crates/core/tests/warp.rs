use std::collections::{BTreeMap, BTreeSet};

use image::{Rgb, RgbImage, Rgba};
use nalgebra::{Matrix3, Point2};
use proptest::prelude::*;

use patchwarp::geometry::{orbit_viewpoint, project_points, ImageSize, Intrinsics, KeypointSet2D, SphericalPose};
use patchwarp::imaging::Mask;
use patchwarp::metrics::psnr_masked;
use patchwarp::raster::patch_visibility;
use patchwarp::toy::{render_sample, vehicle_cad};
use patchwarp::warp::*;

fn kps(points: &[(&str, f64, f64)], side: f64) -> KeypointSet2D {
    points
        .iter()
        .map(|&(n, x, y)| (n.to_string(), Point2::new(x / side, y / side)))
        .collect()
}

fn spec_of(class: &str, patches: &[(&str, &[&str])], mirror: &[(&str, &str)], kp_mirror: &[(&str, &str)]) -> PatchSpec {
    let own = |v: &[(&str, &str)]| -> BTreeMap<String, String> {
        v.iter()
            .flat_map(|(a, b)| [(a.to_string(), b.to_string()), (b.to_string(), a.to_string())])
            .collect()
    };
    PatchSpec::new(
        class.into(),
        patches
            .iter()
            .map(|(n, k)| (n.to_string(), k.iter().map(|s| s.to_string()).collect()))
            .collect(),
        own(mirror),
        own(kp_mirror),
    )
    .unwrap()
}

fn checker(side: u32, cell: u32) -> RgbImage {
    RgbImage::from_fn(side, side, |x, y| {
        if (x / cell + y / cell).is_multiple_of(2) {
            Rgb([230, 200, 40])
        } else {
            Rgb([30, 60, 160])
        }
    })
}

fn alpha_mask(img: &image::RgbaImage) -> Mask {
    Mask::from_fn(img.width(), img.height(), |x, y| img.get_pixel(x, y)[3] > 0)
}

fn rgb_of(img: &image::RgbaImage) -> RgbImage {
    RgbImage::from_fn(img.width(), img.height(), |x, y| {
        let p = img.get_pixel(x, y);
        Rgb([p[0], p[1], p[2]])
    })
}

/// Pixels whose centers are at least `margin` inside the polygon.
fn interior(poly: &Polygon, side: u32, margin: f64) -> Mask {
    Mask::from_fn(side, side, |x, y| {
        let p = Point2::new(x as f64 + 0.5, y as f64 + 0.5);
        poly.contains(&p) && poly.boundary_distance(&p) >= margin
    })
}

#[test]
fn square_keypoints_give_square_hull() {
    let spec = spec_of("t", &[("sq", &["a", "b", "c", "d"])], &[], &[]);
    let k = kps(&[("a", 10.0, 10.0), ("b", 30.0, 10.0), ("c", 30.0, 30.0), ("d", 10.0, 30.0)], 64.0);
    let set = extract_patches(&k, &spec, ImageSize::square(64)).unwrap();
    let poly = set.get("sq").unwrap().source_polygon.as_ref().unwrap();
    assert!((poly.area() - 400.0).abs() < 1e-9);
}

#[test]
fn collinear_keypoints_are_flagged() {
    let spec = spec_of("t", &[("line", &["a", "b", "c"])], &[], &[]);
    let k = kps(&[("a", 1.0, 1.0), ("b", 2.0, 2.0), ("c", 5.0, 5.0)], 64.0);
    let set = extract_patches(&k, &spec, ImageSize::square(64)).unwrap();
    let p = set.get("line").unwrap();
    assert!(p.is_degenerate());
    assert!(p.source_polygon.is_none());
}

#[test]
fn interior_keypoint_is_excluded_from_hull() {
    let spec = spec_of("t", &[("p", &["a", "b", "c", "d", "e"])], &[], &[]);
    let k = kps(
        &[("a", 0.0, 0.0), ("b", 40.0, 0.0), ("c", 40.0, 40.0), ("d", 0.0, 40.0), ("e", 17.0, 23.0)],
        64.0,
    );
    let set = extract_patches(&k, &spec, ImageSize::square(64)).unwrap();
    let poly = set.get("p").unwrap().source_polygon.clone().unwrap();
    assert_eq!(poly.vertices().len(), 4);
    assert!(!poly.vertices().iter().any(|v| (v - Point2::new(17.0, 23.0)).norm() < 1e-12));
}

#[test]
fn missing_keypoints_are_listed() {
    let spec = spec_of("t", &[("p", &["a", "b", "zz"])], &[], &[]);
    let k = kps(&[("a", 0.0, 0.0), ("b", 1.0, 0.0)], 64.0);
    match extract_patches(&k, &spec, ImageSize::square(64)) {
        Err(WarpError::MissingKeypoints(names)) => assert_eq!(names, vec!["zz".to_string()]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn identical_keypoints_reproduce_source_crops() {
    let size = ImageSize::square(128);
    let sample = render_sample("s", &vehicle_cad(2), SphericalPose::new(40.0, 20.0, 140.0).unwrap(), size);
    let spec = PatchSpec::vehicle();
    let source = extract_patches(&sample.keypoints, &spec, size).unwrap().with_source(&sample.image).unwrap();
    let warped = warp_to_view(&source, &sample.keypoints, &sample.keypoints, &spec).unwrap();
    for p in warped.iter().filter(|p| p.is_active()) {
        let h = p.homography.unwrap();
        assert!((h.matrix() - Matrix3::identity()).abs().max() < 1e-10, "{}", p.name);
        assert_eq!(p.content, source.get(&p.name).unwrap().content, "{}", p.name);
    }
}

#[test]
fn half_turn_swaps_left_and_right_sides() {
    let size = ImageSize::square(128);
    let k = Intrinsics::for_size(size);
    let cad = vehicle_cad(0);
    let spec = PatchSpec::vehicle();
    let src_pose = SphericalPose::new(30.0, 15.0, 140.0).unwrap();
    let dst_pose = SphericalPose::new(210.0, 15.0, 140.0).unwrap();
    let sample = render_sample("s", &cad, src_pose, size);
    let kps_dst = project_points(&cad.keypoints, &orbit_viewpoint(&dst_pose).unwrap(), &k, size).unwrap();
    let source = extract_patches(&sample.keypoints, &spec, size).unwrap().with_source(&sample.image).unwrap();
    let warped = warp_to_view(&source, &sample.keypoints, &kps_dst, &spec).unwrap();
    let center = size.width as f64 / 2.0;
    for name in ["left", "right"] {
        let src_side = source.get(name).unwrap().source_polygon.as_ref().unwrap().centroid().x - center;
        let dst_side = warped.get(name).unwrap().polygon.as_ref().unwrap().centroid().x - center;
        // oracle: projected 3D centroid of the patch keypoints
        let names = spec.keypoints_of(name).unwrap();
        let oracle = |pose: &SphericalPose| {
            let v = orbit_viewpoint(pose).unwrap();
            let mean = names.iter().fold(nalgebra::Vector3::zeros(), |a, n| a + cad.keypoints.get(n).unwrap().coords)
                / names.len() as f64;
            k.project(&v.transform_point(&mean.into())).unwrap().x - center
        };
        assert_eq!(src_side.signum(), oracle(&src_pose).signum(), "{name}");
        assert_eq!(dst_side.signum(), oracle(&dst_pose).signum(), "{name}");
        assert_ne!(src_side.signum(), dst_side.signum(), "{name}");
    }
}

#[test]
fn exact_quads_land_on_projected_keypoints() {
    let size = ImageSize::square(128);
    let k = Intrinsics::for_size(size);
    let cad = vehicle_cad(5);
    let spec = PatchSpec::vehicle();
    let sample = render_sample("s", &cad, SphericalPose::new(50.0, 20.0, 150.0).unwrap(), size);
    let dst_view = orbit_viewpoint(&SphericalPose::new(80.0, 25.0, 135.0).unwrap()).unwrap();
    let kps_dst = project_points(&cad.keypoints, &dst_view, &k, size).unwrap();
    let source = extract_patches(&sample.keypoints, &spec, size).unwrap().with_source(&sample.image).unwrap();
    let warped = warp_to_view(&source, &sample.keypoints, &kps_dst, &spec).unwrap();
    for p in warped.iter().filter(|p| p.is_active()) {
        let h = p.homography.unwrap();
        for n in spec.keypoints_of(&p.name).unwrap() {
            let s = sample.keypoints.get(n).unwrap();
            let d = kps_dst.get(n).unwrap();
            let mapped = h.apply(&Point2::new(s.x * 128.0, s.y * 128.0)).unwrap();
            assert!((mapped - Point2::new(d.x * 128.0, d.y * 128.0)).norm() < 1e-6, "{} {n}", p.name);
        }
        // warped polygon corners are the projected destination keypoints
        let poly = p.polygon.as_ref().unwrap();
        for v in poly.vertices() {
            let nearest = spec
                .keypoints_of(&p.name)
                .unwrap()
                .iter()
                .map(|n| (Point2::new(kps_dst.get(n).unwrap().x * 128.0, kps_dst.get(n).unwrap().y * 128.0) - v).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < 1e-6);
        }
    }
}

#[test]
fn dewarp_through_the_source_view_is_exact() {
    let size = ImageSize::square(128);
    let sample = render_sample("s", &vehicle_cad(1), SphericalPose::new(120.0, 10.0, 140.0).unwrap(), size);
    let spec = PatchSpec::vehicle();
    let all: VisibleSet = spec.patch_names().map(str::to_owned).collect();
    let source = extract_patches(&sample.keypoints, &spec, size).unwrap().with_source(&sample.image).unwrap();
    let round = dewarp_roundtrip(&sample.image, &sample.keypoints, &sample.keypoints, &spec, &all, &all).unwrap();
    for p in round.iter().filter(|p| p.is_active()) {
        assert_eq!(p.content, source.get(&p.name).unwrap().content, "{}", p.name);
    }
}

#[test]
fn dewarp_through_a_shrunk_view_loses_little() {
    let side = 128u32;
    let img = checker(side, 16);
    let spec = spec_of("t", &[("sq", &["a", "b", "c", "d"])], &[], &[]);
    let src = kps(&[("a", 32.0, 32.0), ("b", 96.0, 32.0), ("c", 96.0, 96.0), ("d", 32.0, 96.0)], side as f64);
    // half the side, a quarter of the area
    let mid = kps(&[("a", 48.0, 48.0), ("b", 80.0, 48.0), ("c", 80.0, 80.0), ("d", 48.0, 80.0)], side as f64);
    let all: VisibleSet = ["sq".to_string()].into();
    let source = extract_patches(&src, &spec, ImageSize::square(side)).unwrap().with_source(&img).unwrap();
    let round = dewarp_roundtrip(&img, &src, &mid, &spec, &all, &all).unwrap();
    let before = &source.get("sq").unwrap().content;
    let after = &round.get("sq").unwrap().content;
    assert_eq!(alpha_mask(before), alpha_mask(after));
    let poly = source.get("sq").unwrap().source_polygon.clone().unwrap();
    let p = psnr_masked(&rgb_of(before), &rgb_of(after), &interior(&poly, side, 2.0)).unwrap().unwrap();
    assert!(p >= 20.0 && p.is_finite(), "{p}");
}

#[test]
fn patch_hidden_at_the_intermediate_view_is_dropped() {
    let size = ImageSize::square(128);
    let k = Intrinsics::for_size(size);
    let cad = vehicle_cad(0);
    let spec = PatchSpec::vehicle();
    let sample = render_sample("s", &cad, SphericalPose::new(300.0, 15.0, 140.0).unwrap(), size);
    let src_view = orbit_viewpoint(&SphericalPose::new(300.0, 15.0, 140.0).unwrap()).unwrap();
    let mid_view = orbit_viewpoint(&SphericalPose::new(90.0, 15.0, 140.0).unwrap()).unwrap();
    let vis = |v| patch_visibility(&cad.mesh, &cad.keypoints, &spec, v, &k, size, &Default::default());
    let vis_src = vis(&src_view);
    let vis_mid = vis(&mid_view);
    assert!(vis_src.is_visible("right") && !vis_mid.is_visible("right"));
    let kps_mid = project_points(&cad.keypoints, &mid_view, &k, size).unwrap();
    let round = dewarp_roundtrip(
        &sample.image,
        &sample.keypoints,
        &kps_mid,
        &spec,
        &vis_src.visible_set(),
        &vis_mid.visible_set(),
    )
    .unwrap();
    let right = round.get("right").unwrap();
    assert_eq!(right.status, PatchStatus::Occluded);
    assert!(right.content.pixels().all(|p| p[3] == 0));
}

/// Left patch at x in [10, 40), right patch at x in [60, 90); keypoint
/// `a` (left's top-left) mirrors `e` (right's top-right) and so on.
fn mirror_fixture() -> (PatchSpec, KeypointSet2D) {
    let spec = spec_of(
        "glyph",
        &[("left", &["a", "b", "c", "d"]), ("right", &["e", "f", "g", "h"])],
        &[("left", "right")],
        &[("a", "e"), ("b", "f"), ("c", "g"), ("d", "h")],
    );
    let k = kps(
        &[
            ("a", 10.0, 10.0),
            ("b", 40.0, 10.0),
            ("c", 40.0, 40.0),
            ("d", 10.0, 40.0),
            ("e", 90.0, 10.0),
            ("f", 60.0, 10.0),
            ("g", 60.0, 40.0),
            ("h", 90.0, 40.0),
        ],
        100.0,
    );
    (spec, k)
}

/// Left-pointing arrow inside [10, 40)^2 on white.
fn arrow_image() -> RgbImage {
    RgbImage::from_fn(100, 100, |x, y| {
        let (x, y) = (x as i32 - 10, y as i32 - 10);
        if !(0..30).contains(&x) || !(0..30).contains(&y) {
            return Rgb([255, 255, 255]);
        }
        let head = x < 12 && (y - 15).abs() <= x;
        let shaft = x >= 12 && (11..=19).contains(&y);
        if head || shaft {
            Rgb([200, 20, 20])
        } else {
            Rgb([240, 240, 200 - x as u8])
        }
    })
}

#[test]
fn mirror_fill_flips_the_texture() {
    let (spec, k) = mirror_fixture();
    let img = arrow_image();
    let size = ImageSize::square(100);
    let vis_src: VisibleSet = ["left".to_string()].into();
    let vis_dst: VisibleSet = ["right".to_string()].into();
    let source = extract_patches(&k, &spec, size).unwrap().with_source(&img).unwrap().retain_visible(&vis_src);
    let warped = warp_to_view(&source, &k, &k, &spec).unwrap().retain_visible(&vis_dst);
    assert!(!warped.get("right").unwrap().is_active());
    let filled = symmetry_transfer(&source, &warped, &k, &k, &vis_src, &vis_dst, &spec).unwrap();
    let right = filled.get("right").unwrap();
    assert!(right.is_active());
    assert_eq!(right.mirrored_from.as_deref(), Some("left"));
    // pixel-flip oracle: x' = 100 - x maps pixel column i to column 99 - i
    for y in 10..40 {
        for x in 60..90 {
            let got = right.content.get_pixel(x, y);
            let src = img.get_pixel(99 - x, y);
            assert_eq!(*got, Rgba([src[0], src[1], src[2], 255]), "({x},{y})");
        }
    }
    // the arrow now points right: its tip column is the rightmost red column
    let red_cols: Vec<u32> = (60..90).filter(|&x| right.content.get_pixel(x, 25)[0] == 200).collect();
    let tip = *red_cols.iter().max().unwrap();
    let tip_rows = (10..40).filter(|&y| right.content.get_pixel(tip, y)[0] == 200).count();
    assert_eq!(tip_rows, 1);
}

#[test]
fn mirror_fill_is_a_no_op_when_both_sides_are_visible() {
    let (spec, k) = mirror_fixture();
    let img = arrow_image();
    let both: VisibleSet = ["left".to_string(), "right".to_string()].into();
    let source = extract_patches(&k, &spec, ImageSize::square(100)).unwrap().with_source(&img).unwrap();
    let warped = warp_to_view(&source, &k, &k, &spec).unwrap();
    let filled = symmetry_transfer(&source, &warped, &k, &k, &both, &both, &spec).unwrap();
    assert_eq!(filled, warped);
    // neither side visible: nothing to copy from
    let none = VisibleSet::new();
    let hidden = source.clone().retain_visible(&none);
    let w2 = warp_to_view(&hidden, &k, &k, &spec).unwrap();
    let f2 = symmetry_transfer(&hidden, &w2, &k, &k, &none, &both, &spec).unwrap();
    assert!(f2.iter().all(|p| !p.is_active()));
}

#[test]
fn one_bad_patch_does_not_abort_the_set() {
    let spec = spec_of("t", &[("good", &["a", "b", "c", "d"]), ("bad", &["a", "b", "e", "f"])], &[], &[]);
    let src = kps(
        &[("a", 10.0, 10.0), ("b", 30.0, 10.0), ("c", 30.0, 30.0), ("d", 10.0, 30.0), ("e", 31.0, 20.0), ("f", 9.0, 25.0)],
        64.0,
    );
    // e and f collapse onto the a-b line at the destination
    let mut dst = src.clone();
    dst.insert("e", Point2::new(20.0 / 64.0, 10.0 / 64.0));
    dst.insert("f", Point2::new(25.0 / 64.0, 10.0 / 64.0));
    let img = checker(64, 4);
    let source = extract_patches(&src, &spec, ImageSize::square(64)).unwrap().with_source(&img).unwrap();
    let warped = warp_to_view(&source, &src, &dst, &spec).unwrap();
    assert!(warped.get("good").unwrap().is_active());
    let bad = warped.get("bad").unwrap();
    assert!(bad.is_degenerate());
    assert!(bad.content.pixels().all(|p| p[3] == 0));
}

fn quad_strategy() -> impl Strategy<Value = Vec<Point2<f64>>> {
    // a jittered square keeps the quad convex and well conditioned
    prop::collection::vec((-8.0..8.0f64, -8.0..8.0f64), 4).prop_map(|j| {
        let base = [(20.0, 20.0), (100.0, 20.0), (100.0, 100.0), (20.0, 100.0)];
        base.iter().zip(j).map(|(&(x, y), (dx, dy))| Point2::new(x + dx, y + dy)).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn homographies_compose(a in quad_strategy(), b in quad_strategy(), c in quad_strategy()) {
        let ab = estimate_homography(&a, &b).unwrap();
        let bc = estimate_homography(&b, &c).unwrap();
        let ac = estimate_homography(&a, &c).unwrap();
        let composed = bc.after(&ab);
        prop_assert!((composed.matrix() - ac.matrix()).abs().max() < 1e-6);
    }

    #[test]
    fn scaling_conjugates_the_homography(a in quad_strategy(), b in quad_strategy(), s in 0.25..4.0f64) {
        let h = estimate_homography(&a, &b).unwrap();
        let scale = |v: &[Point2<f64>]| v.iter().map(|p| Point2::new(p.x * s, p.y * s)).collect::<Vec<_>>();
        let hs = estimate_homography(&scale(&a), &scale(&b)).unwrap();
        let m = Homography::scaling(s, s);
        let conj = m.after(&h).after(&m.inverse().unwrap());
        prop_assert!((conj.matrix() - hs.matrix()).abs().max() < 1e-6);
        for p in &a {
            let q = hs.apply(&Point2::new(p.x * s, p.y * s)).unwrap();
            let r = h.apply(p).unwrap();
            prop_assert!((q - Point2::new(r.x * s, r.y * s)).norm() < 1e-6);
        }
    }

    #[test]
    fn warped_alpha_stays_inside_the_destination(a in quad_strategy(), b in quad_strategy()) {
        let img = checker(128, 8);
        let src_poly = Polygon::hull(&a).unwrap();
        let dst_poly = Polygon::hull(&b).unwrap();
        let h = estimate_homography(&a, &b).unwrap();
        let out = warp_patch(&crop_patch(&img, &src_poly), &src_poly, &dst_poly, &h, ImageSize::square(128)).unwrap();
        for (x, y, p) in out.enumerate_pixels() {
            let inside = dst_poly.contains(&Point2::new(x as f64 + 0.5, y as f64 + 0.5));
            prop_assert!(inside || p[3] == 0);
        }
    }

    #[test]
    fn dropped_patches_are_transparent(keep in prop::collection::btree_set("[a-f]", 0..6)) {
        let size = ImageSize::square(128);
        let sample = render_sample("s", &vehicle_cad(4), SphericalPose::new(70.0, 20.0, 140.0).unwrap(), size);
        let spec = PatchSpec::vehicle();
        let names: Vec<String> = spec.patch_names().map(str::to_owned).collect();
        let visible: BTreeSet<String> = keep.iter().map(|c| names[(c.as_bytes()[0] - b'a') as usize].clone()).collect();
        let set = extract_patches(&sample.keypoints, &spec, size).unwrap().with_source(&sample.image).unwrap().retain_visible(&visible);
        for p in set.iter() {
            prop_assert_eq!(p.is_active(), visible.contains(&p.name));
            if !p.is_active() {
                prop_assert!(p.content.pixels().all(|q| q[3] == 0));
            }
        }
    }
}
