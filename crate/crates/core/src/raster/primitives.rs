//! Procedural meshes used as proxies and test fixtures.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use super::Mesh;

/// Axis-aligned box centered at the origin with outward-wound faces.
///
/// Faces are tagged `front` (+x), `back` (-x), `left` (+y), `right` (-y),
/// `top` (+z) and `bottom` (-z).
pub fn cuboid(lx: f64, ly: f64, lz: f64) -> Mesh {
    let (hx, hy, hz) = (lx / 2.0, ly / 2.0, lz / 2.0);
    let v = |sx: f64, sy: f64, sz: f64| Point3::new(sx * hx, sy * hy, sz * hz);
    let vertices = vec![
        v(-1.0, -1.0, -1.0), // 0
        v(1.0, -1.0, -1.0),  // 1
        v(1.0, 1.0, -1.0),   // 2
        v(-1.0, 1.0, -1.0),  // 3
        v(-1.0, -1.0, 1.0),  // 4
        v(1.0, -1.0, 1.0),   // 5
        v(1.0, 1.0, 1.0),    // 6
        v(-1.0, 1.0, 1.0),   // 7
    ];
    let quads: [([u32; 4], &str); 6] = [
        ([1, 2, 6, 5], "front"),
        ([3, 0, 4, 7], "back"),
        ([2, 3, 7, 6], "left"),
        ([0, 1, 5, 4], "right"),
        ([4, 5, 6, 7], "top"),
        ([3, 2, 1, 0], "bottom"),
    ];
    let mut faces = Vec::new();
    let mut tags = Vec::new();
    for (q, tag) in quads {
        faces.push([q[0], q[1], q[2]]);
        faces.push([q[0], q[2], q[3]]);
        tags.push(tag.to_string());
        tags.push(tag.to_string());
    }
    Mesh::with_tags(vertices, faces, tags).expect("cuboid is well formed")
}

/// Geodesic sphere from `subdivisions` rounds of midpoint splitting of an
/// icosahedron. Vertices lie exactly on the sphere.
pub fn icosphere(radius: f64, subdivisions: u32) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vector3<f64>>| -> u32 {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let m = (verts[a as usize] + verts[b as usize]).normalize();
                verts.push(m);
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = verts.into_iter().map(|v| Point3::from(v * radius)).collect();
    Mesh::new(vertices, faces).expect("icosphere is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Outward winding: every face normal points away from the origin.
    fn outward(mesh: &Mesh) -> bool {
        (0..mesh.face_count()).all(|f| {
            let [a, b, c] = mesh.triangle(f);
            let centroid = (a.coords + b.coords + c.coords) / 3.0;
            mesh.face_normal(f).dot(&centroid) > 0.0
        })
    }

    #[test]
    fn cuboid_is_outward_and_tagged() {
        let m = cuboid(4.0, 2.0, 1.0);
        assert_eq!(m.face_count(), 12);
        assert!(outward(&m));
        let tags = m.tags().unwrap();
        for (f, tag) in tags.iter().enumerate() {
            let n = m.face_normal(f);
            let expect = match tag.as_str() {
                "front" => Vector3::x(),
                "back" => -Vector3::x(),
                "left" => Vector3::y(),
                "right" => -Vector3::y(),
                "top" => Vector3::z(),
                _ => -Vector3::z(),
            };
            assert!((n - expect).norm() < 1e-12, "{tag}");
        }
    }

    #[test]
    fn icosphere_counts() {
        let m = icosphere(2.0, 2);
        assert_eq!(m.face_count(), 20 * 16);
        assert!(outward(&m));
        assert!(m.vertices().iter().all(|v| (v.coords.norm() - 2.0).abs() < 1e-12));
    }
}
