//! Procedural vehicles, a box proxy and textured renders of them, used for
//! the bundled example dataset and for tests.
//!
//! Model frame: +x toward the nose, +y to the vehicle's left, +z up. An
//! orbit azimuth of 0 therefore looks at the front, 90 at the left side.

use std::collections::BTreeMap;

use image::{Rgb, RgbImage};
use nalgebra::{Point2, Point3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{AnnotatedSample, CadCatalog, CadModel, ViewSpec};
use crate::geometry::{
    orbit_viewpoint, project_points, ImageSize, Intrinsics, KeypointSet3D, SphericalPose, Viewpoint,
};
use crate::imaging::BACKGROUND;
use crate::raster::{rasterize, Mesh};
use crate::warp::PatchSpec;

/// Shape parameters of the toy vehicle: a lower box with a tapered cabin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleShape {
    pub half_length: f64,
    pub half_width: f64,
    pub ground: f64,
    pub beltline: f64,
    pub roof: f64,
    pub roof_front: f64,
    pub roof_back: f64,
    pub roof_half_width: f64,
}

impl Default for VehicleShape {
    fn default() -> Self {
        Self {
            half_length: 2.0,
            half_width: 0.9,
            ground: 0.2,
            beltline: 0.8,
            roof: 1.4,
            roof_front: 0.4,
            roof_back: -1.0,
            roof_half_width: 0.7,
        }
    }
}

/// Number of CAD variants in the toy catalog.
pub const TOY_CAD_COUNT: u32 = 10;

const VARIANT_NAMES: [&str; 10] = [
    "sedan", "hatchback", "wagon", "coupe", "suv", "minivan", "pickup", "compact", "limousine", "van",
];

impl VehicleShape {
    /// The `id`-th catalog variant (ids wrap modulo [`TOY_CAD_COUNT`]).
    pub fn variant(id: u32) -> Self {
        let i = (id % TOY_CAD_COUNT) as f64;
        let base = Self::default();
        Self {
            half_length: base.half_length + 0.12 * ((i * 1.7).sin()),
            half_width: base.half_width + 0.06 * ((i * 2.3).cos()),
            ground: base.ground,
            beltline: base.beltline + 0.08 * ((i * 1.1).sin()),
            roof: base.roof + 0.2 * ((i * 0.9).cos()),
            roof_front: base.roof_front + 0.3 * ((i * 1.3).sin()),
            roof_back: base.roof_back - 0.35 * ((i * 0.7).cos()),
            roof_half_width: base.roof_half_width + 0.05 * ((i * 1.9).sin()),
        }
    }

    pub fn keypoints(&self) -> KeypointSet3D {
        let (a, b, c) = (self.half_length, self.half_width, self.roof_half_width);
        let mut k = KeypointSet3D::default();
        for (side, s) in [("left", 1.0), ("right", -1.0)] {
            k.insert(format!("{side}_front_wheel"), Point3::new(a, s * b, self.ground));
            k.insert(format!("{side}_back_wheel"), Point3::new(-a, s * b, self.ground));
            k.insert(format!("{side}_front_light"), Point3::new(a, s * b, self.beltline));
            k.insert(format!("{side}_back_trunk"), Point3::new(-a, s * b, self.beltline));
            k.insert(format!("upper_{side}_windshield"), Point3::new(self.roof_front, s * c, self.roof));
            k.insert(format!("upper_{side}_rearwindow"), Point3::new(self.roof_back, s * c, self.roof));
        }
        k
    }

    /// Closed convex mesh; every face is tagged with its panel name.
    pub fn mesh(&self) -> Mesh {
        let k = self.keypoints();
        let quads: [(&str, [&str; 4]); 10] = [
            ("bottom", ["left_front_wheel", "right_front_wheel", "right_back_wheel", "left_back_wheel"]),
            ("left", ["left_front_wheel", "left_back_wheel", "left_back_trunk", "left_front_light"]),
            ("right", ["right_front_wheel", "right_back_wheel", "right_back_trunk", "right_front_light"]),
            ("front", ["left_front_wheel", "right_front_wheel", "right_front_light", "left_front_light"]),
            ("back", ["left_back_wheel", "right_back_wheel", "right_back_trunk", "left_back_trunk"]),
            (
                "windshield",
                ["left_front_light", "right_front_light", "upper_right_windshield", "upper_left_windshield"],
            ),
            (
                "rearwindow",
                ["left_back_trunk", "right_back_trunk", "upper_right_rearwindow", "upper_left_rearwindow"],
            ),
            (
                "upper_left",
                ["left_front_light", "left_back_trunk", "upper_left_rearwindow", "upper_left_windshield"],
            ),
            (
                "upper_right",
                ["right_front_light", "right_back_trunk", "upper_right_rearwindow", "upper_right_windshield"],
            ),
            (
                "roof",
                [
                    "upper_left_windshield",
                    "upper_right_windshield",
                    "upper_right_rearwindow",
                    "upper_left_rearwindow",
                ],
            ),
        ];
        let points: Vec<(String, Point3<f64>)> = k.0.iter().map(|(n, p)| (n.clone(), *p)).collect();
        quad_mesh(&points, &quads)
    }
}

/// Triangulates named quads into an outward-wound, tagged mesh.
fn quad_mesh(points: &[(String, Point3<f64>)], quads: &[(&str, [&str; 4])]) -> Mesh {
    let index: BTreeMap<&str, u32> = points.iter().enumerate().map(|(i, (n, _))| (n.as_str(), i as u32)).collect();
    let vertices: Vec<Point3<f64>> = points.iter().map(|(_, p)| *p).collect();
    let center = vertices.iter().fold(nalgebra::Vector3::zeros(), |a, p| a + p.coords) / vertices.len() as f64;
    let mut faces = Vec::new();
    let mut tags = Vec::new();
    for (tag, q) in quads {
        let ids = q.map(|n| index[n]);
        for tri in [[ids[0], ids[1], ids[2]], [ids[0], ids[2], ids[3]]] {
            let [a, b, c] = tri.map(|i| vertices[i as usize]);
            let n = (b - a).cross(&(c - a));
            let outward = n.dot(&(a.coords - center)) > 0.0;
            faces.push(if outward { tri } else { [tri[0], tri[2], tri[1]] });
            tags.push(tag.to_string());
        }
    }
    Mesh::with_tags(vertices, faces, tags).expect("toy mesh is well formed")
}

pub fn vehicle_cad(id: u32) -> CadModel {
    let shape = VehicleShape::variant(id);
    CadModel {
        id,
        name: VARIANT_NAMES[(id % TOY_CAD_COUNT) as usize].to_string(),
        mesh_path: format!("cads/{id:02}.obj"),
        mesh: shape.mesh(),
        keypoints: shape.keypoints(),
    }
}

/// All toy vehicle variants, ids `0..TOY_CAD_COUNT`.
pub fn vehicle_catalog() -> CadCatalog {
    let mut catalog = CadCatalog::new("car");
    for id in 0..TOY_CAD_COUNT {
        catalog.insert(vehicle_cad(id));
    }
    catalog
}

/// Axis-aligned box with vehicle keypoint names on its corners: wheels at
/// the bottom, lights (front, +x) and trunk (back, -x) at the top.
pub fn box_proxy(lx: f64, ly: f64, lz: f64) -> CadModel {
    let (a, b, h) = (lx / 2.0, ly / 2.0, lz / 2.0);
    let mut k = KeypointSet3D::default();
    for (side, s) in [("left", 1.0), ("right", -1.0)] {
        k.insert(format!("{side}_front_wheel"), Point3::new(a, s * b, -h));
        k.insert(format!("{side}_back_wheel"), Point3::new(-a, s * b, -h));
        k.insert(format!("{side}_front_light"), Point3::new(a, s * b, h));
        k.insert(format!("{side}_back_trunk"), Point3::new(-a, s * b, h));
    }
    let spec = box_spec();
    let quads: Vec<(&str, [&str; 4])> = spec
        .patches()
        .iter()
        .map(|(name, kps)| {
            (
                name.as_str(),
                [kps[0].as_str(), kps[1].as_str(), kps[2].as_str(), kps[3].as_str()],
            )
        })
        .collect();
    let points: Vec<(String, Point3<f64>)> = k.0.iter().map(|(n, p)| (n.clone(), *p)).collect();
    CadModel {
        id: 0,
        name: "box".into(),
        mesh_path: "cads/box.obj".into(),
        mesh: quad_mesh(&points, &quads),
        keypoints: k,
    }
}

/// Six patches of the box proxy, one per face, in boundary order.
pub fn box_spec() -> PatchSpec {
    let faces: [(&str, [&str; 4]); 6] = [
        ("left", ["left_front_wheel", "left_back_wheel", "left_back_trunk", "left_front_light"]),
        ("right", ["right_front_wheel", "right_back_wheel", "right_back_trunk", "right_front_light"]),
        ("front", ["left_front_wheel", "right_front_wheel", "right_front_light", "left_front_light"]),
        ("back", ["left_back_wheel", "right_back_wheel", "right_back_trunk", "left_back_trunk"]),
        ("roof", ["left_front_light", "right_front_light", "right_back_trunk", "left_back_trunk"]),
        ("bottom", ["left_front_wheel", "right_front_wheel", "right_back_wheel", "left_back_wheel"]),
    ];
    let patches = faces
        .iter()
        .map(|(n, k)| (n.to_string(), k.iter().map(|s| s.to_string()).collect()))
        .collect();
    let mirror = [("left", "right"), ("right", "left"), ("front", "front"), ("back", "back"), ("roof", "roof"), ("bottom", "bottom")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    let keypoint_mirror = faces
        .iter()
        .flat_map(|(_, k)| k.iter())
        .map(|k| {
            let other = if k.contains("left") {
                k.replace("left", "right")
            } else {
                k.replace("right", "left")
            };
            (k.to_string(), other)
        })
        .collect();
    PatchSpec::new("box".into(), patches, mirror, keypoint_mirror).expect("box spec is valid")
}

fn panel_color(tag: &str) -> [f64; 3] {
    match tag {
        "left" => [196.0, 52.0, 44.0],
        "right" => [44.0, 96.0, 190.0],
        "front" => [232.0, 180.0, 40.0],
        "back" => [60.0, 150.0, 80.0],
        "windshield" => [110.0, 190.0, 215.0],
        "rearwindow" => [90.0, 160.0, 190.0],
        "roof" => [150.0, 70.0, 160.0],
        "upper_left" => [210.0, 120.0, 100.0],
        "upper_right" => [100.0, 130.0, 210.0],
        _ => [120.0, 120.0, 120.0],
    }
}

/// Renders `cad` with a procedural texture: each panel has its own base
/// color modulated by a 3D checker pattern, over a white background.
pub fn render_textured(cad: &CadModel, view: &Viewpoint, size: ImageSize) -> RgbImage {
    let k = Intrinsics::for_size(size);
    let buffers = rasterize(&cad.mesh, view, &k, size);
    let to_world = view.inverse();
    let tags = cad.mesh.tags();
    RgbImage::from_fn(size.width, size.height, |x, y| {
        let face = buffers.face_id(x, y);
        if face < 0 {
            return BACKGROUND;
        }
        let tag = tags.map(|t| t[face as usize].as_str()).unwrap_or("");
        let ray = k.ray(&Point2::new(x as f64 + 0.5, y as f64 + 0.5));
        let p = to_world.transform_point(&Point3::from(ray * buffers.depth(x, y)));
        let cell = (p.x / 0.35).floor() + (p.y / 0.35).floor() + (p.z / 0.35).floor();
        let shade = if cell.rem_euclid(2.0) < 1.0 { 1.0 } else { 0.62 };
        let stripe = 0.85 + 0.15 * (p.x * 5.0 + p.z * 3.0).sin();
        let base = panel_color(tag);
        Rgb(base.map(|c| (c * shade * stripe).round().clamp(0.0, 254.0) as u8))
    })
}

/// A sample of `cad` rendered at `pose`, with exact keypoint annotations.
pub fn render_sample(id: &str, cad: &CadModel, pose: SphericalPose, size: ImageSize) -> AnnotatedSample {
    let view = orbit_viewpoint(&pose).expect("orbit poses are valid");
    let k = Intrinsics::for_size(size);
    let keypoints = project_points(&cad.keypoints, &view, &k, size).expect("orbit camera sees all keypoints");
    AnnotatedSample {
        id: id.to_string(),
        class: "car".into(),
        image_path: format!("images/{id}.png"),
        image: render_textured(cad, &view, size),
        keypoints,
        view: ViewSpec::Spherical(pose),
        cad_id: cad.id,
    }
}

/// Catalog plus `count` samples at seeded viewpoints (azimuth uniform,
/// elevation 5..30 degrees, radius 130..160).
pub fn toy_dataset(count: usize, seed: u64, size: ImageSize) -> (CadCatalog, Vec<AnnotatedSample>) {
    let catalog = vehicle_catalog();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = (0..count)
        .map(|i| {
            let cad_id = rng.random_range(0..TOY_CAD_COUNT);
            let pose = SphericalPose::new(
                rng.random_range(0.0..360.0),
                rng.random_range(5.0..30.0),
                rng.random_range(130.0..160.0),
            )
            .expect("ranges are valid");
            render_sample(&format!("car_{i:03}"), catalog.get(cad_id).expect("id in range"), pose, size)
        })
        .collect();
    (catalog, samples)
}
