use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh has no faces")]
    Empty,
    #[error("face {face} references vertex {index} but the mesh has {count} vertices")]
    IndexOutOfRange { face: usize, index: usize, count: usize },
    #[error("face {face}: {message}")]
    BadFace { face: usize, message: String },
    #[error("line {line}: polygon with {count} vertices; only triangles are supported")]
    NonTriangle { line: usize, count: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("tag count {tags} does not match face count {faces}")]
    TagCount { tags: usize, faces: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Triangle mesh with optional per-face tags.
///
/// Zero-area faces are dropped at construction, so every stored face has a
/// well-defined normal.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[u32; 3]>,
    tags: Option<Vec<String>>,
}

impl Mesh {
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[u32; 3]>) -> Result<Self, MeshError> {
        Self::build(vertices, faces, None)
    }

    pub fn with_tags(
        vertices: Vec<Point3<f64>>,
        faces: Vec<[u32; 3]>,
        tags: Vec<String>,
    ) -> Result<Self, MeshError> {
        if tags.len() != faces.len() {
            return Err(MeshError::TagCount {
                tags: tags.len(),
                faces: faces.len(),
            });
        }
        Self::build(vertices, faces, Some(tags))
    }

    fn build(
        vertices: Vec<Point3<f64>>,
        faces: Vec<[u32; 3]>,
        tags: Option<Vec<String>>,
    ) -> Result<Self, MeshError> {
        for (i, v) in vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(MeshError::Parse {
                    line: 0,
                    message: format!("vertex {i} is not finite"),
                });
            }
        }
        let count = vertices.len();
        let mut kept_faces = Vec::with_capacity(faces.len());
        let mut kept_tags = tags.as_ref().map(|_| Vec::with_capacity(faces.len()));
        for (fi, f) in faces.iter().enumerate() {
            for &idx in f {
                if idx as usize >= count {
                    return Err(MeshError::IndexOutOfRange {
                        face: fi,
                        index: idx as usize,
                        count,
                    });
                }
            }
            let [a, b, c] = f.map(|i| vertices[i as usize]);
            let area2 = (b - a).cross(&(c - a)).norm();
            let scale = (b - a).norm().max((c - a).norm()).max(1e-300);
            if area2 <= 1e-12 * scale * scale {
                log::debug!("dropping degenerate face {fi}");
                continue;
            }
            kept_faces.push(*f);
            if let (Some(out), Some(src)) = (kept_tags.as_mut(), tags.as_ref()) {
                out.push(src[fi].clone());
            }
        }
        if kept_faces.is_empty() {
            return Err(MeshError::Empty);
        }
        Ok(Self {
            vertices,
            faces: kept_faces,
            tags: kept_tags,
        })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn tags(&self) -> Option<&[String]> {
        self.tags.as_deref()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn triangle(&self, face: usize) -> [Point3<f64>; 3] {
        self.faces[face].map(|i| self.vertices[i as usize])
    }

    /// Unit normal following the right-hand winding of the face.
    pub fn face_normal(&self, face: usize) -> Vector3<f64> {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a)).normalize()
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for f in &self.faces {
            for &i in f {
                let v = self.vertices[i as usize];
                lo = lo.inf(&v);
                hi = hi.sup(&v);
            }
        }
        (lo, hi)
    }

    pub fn bounding_diagonal(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (hi - lo).norm()
    }

    /// Keeps only the faces for which `keep` returns true.
    pub fn filter_faces(&self, mut keep: impl FnMut(usize) -> bool) -> Result<Mesh, MeshError> {
        let mut faces = Vec::new();
        let mut tags = self.tags.as_ref().map(|_| Vec::new());
        for fi in 0..self.faces.len() {
            if keep(fi) {
                faces.push(self.faces[fi]);
                if let (Some(out), Some(src)) = (tags.as_mut(), self.tags.as_ref()) {
                    out.push(src[fi].clone());
                }
            }
        }
        if faces.is_empty() {
            return Err(MeshError::Empty);
        }
        Ok(Mesh {
            vertices: self.vertices.clone(),
            faces,
            tags,
        })
    }

    /// Concatenates two meshes; tags are kept only when both meshes have them.
    pub fn merge(&self, other: &Mesh) -> Mesh {
        let offset = self.vertices.len() as u32;
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut faces = self.faces.clone();
        faces.extend(other.faces.iter().map(|f| f.map(|i| i + offset)));
        let tags = match (&self.tags, &other.tags) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).cloned().collect()),
            _ => None,
        };
        Mesh {
            vertices,
            faces,
            tags,
        }
    }

    /// Applies `f` to every vertex.
    pub fn map_vertices(&self, f: impl Fn(&Point3<f64>) -> Point3<f64>) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
            tags: self.tags.clone(),
        }
    }

    /// Parses the triangle subset of Wavefront OBJ.
    ///
    /// Only `v` and `f` records are read. Face indices are 1-based (negative
    /// indices count from the end); `v/vt/vn` suffixes are ignored. Polygons
    /// with more than three vertices are rejected. A `g` or `o` record sets the
    /// tag of subsequent faces.
    pub fn from_obj_str(src: &str) -> Result<Mesh, MeshError> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        let mut tags = Vec::new();
        let mut group: Option<String> = None;
        let mut any_group = false;
        for (lineno, raw) in src.lines().enumerate() {
            let line = lineno + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            let mut parts = content.split_whitespace();
            match parts.next() {
                Some("v") => {
                    let coords: Vec<f64> = parts
                        .take(3)
                        .map(|t| {
                            t.parse::<f64>().map_err(|e| MeshError::Parse {
                                line,
                                message: format!("bad vertex coordinate {t:?}: {e}"),
                            })
                        })
                        .collect::<Result<_, _>>()?;
                    if coords.len() != 3 {
                        return Err(MeshError::Parse {
                            line,
                            message: "vertex needs 3 coordinates".into(),
                        });
                    }
                    vertices.push(Point3::new(coords[0], coords[1], coords[2]));
                }
                Some("f") => {
                    let idx: Vec<u32> = parts
                        .map(|t| parse_face_index(t, vertices.len(), line))
                        .collect::<Result<_, _>>()?;
                    if idx.len() != 3 {
                        return Err(MeshError::NonTriangle {
                            line,
                            count: idx.len(),
                        });
                    }
                    faces.push([idx[0], idx[1], idx[2]]);
                    tags.push(group.clone().unwrap_or_default());
                }
                Some("g") | Some("o") => {
                    group = parts.next().map(str::to_owned);
                    any_group = any_group || group.is_some();
                }
                _ => {}
            }
        }
        if any_group {
            Mesh::with_tags(vertices, faces, tags)
        } else {
            Mesh::new(vertices, faces)
        }
    }

    pub fn load_obj(path: impl AsRef<Path>) -> Result<Mesh, MeshError> {
        Mesh::from_obj_str(&std::fs::read_to_string(path)?)
    }

    /// Writes an OBJ that [`Mesh::from_obj_str`] reads back to an equal mesh.
    pub fn to_obj_string(&self) -> String {
        let mut out = String::new();
        for v in &self.vertices {
            // {:?} prints the shortest representation that round-trips
            let _ = writeln!(out, "v {:?} {:?} {:?}", v.x, v.y, v.z);
        }
        let mut current: Option<&str> = None;
        for (fi, f) in self.faces.iter().enumerate() {
            if let Some(tags) = &self.tags {
                let tag = tags[fi].as_str();
                if current != Some(tag) {
                    let _ = writeln!(out, "g {tag}");
                    current = Some(tag);
                }
            }
            let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        out
    }
}

fn parse_face_index(token: &str, vertex_count: usize, line: usize) -> Result<u32, MeshError> {
    let first = token.split('/').next().unwrap_or("");
    let raw: i64 = first.parse().map_err(|e| MeshError::Parse {
        line,
        message: format!("bad face index {token:?}: {e}"),
    })?;
    let idx = if raw > 0 {
        raw - 1
    } else if raw < 0 {
        vertex_count as i64 + raw
    } else {
        return Err(MeshError::Parse {
            line,
            message: "face index 0 is invalid (OBJ is 1-based)".into(),
        });
    };
    if idx < 0 {
        return Err(MeshError::Parse {
            line,
            message: format!("relative index {raw} before first vertex"),
        });
    }
    Ok(idx as u32)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRI: &str = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";

    #[test]
    fn parses_triangles_with_suffixes() {
        let m = Mesh::from_obj_str("# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1/1/1 2//1 -1\n").unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2]]);
        assert!(m.tags().is_none());
    }

    #[test]
    fn rejects_quads() {
        let err = Mesh::from_obj_str("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap_err();
        assert!(matches!(err, MeshError::NonTriangle { line: 5, count: 4 }), "{err}");
    }

    #[test]
    fn rejects_bad_indices() {
        assert!(matches!(
            Mesh::from_obj_str("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n"),
            Err(MeshError::IndexOutOfRange { index: 8, .. })
        ));
        assert!(matches!(
            Mesh::from_obj_str("v 0 0 0\nf 0 1 1\n"),
            Err(MeshError::Parse { .. })
        ));
    }

    #[test]
    fn degenerate_faces_are_filtered() {
        let src = format!("{TRI}v 2 0 0\nf 1 2 4\n");
        let m = Mesh::from_obj_str(&src).unwrap();
        assert_eq!(m.face_count(), 1);
        assert!(matches!(
            Mesh::from_obj_str("v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n"),
            Err(MeshError::Empty)
        ));
    }

    #[test]
    fn obj_round_trip_keeps_tags() {
        let m = Mesh::with_tags(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.1, 0.0),
                Point3::new(0.0, 1.0, 0.3),
                Point3::new(1.0, 1.0, 1.0 / 3.0),
            ],
            vec![[0, 1, 2], [1, 3, 2]],
            vec!["left".into(), "roof".into()],
        )
        .unwrap();
        let back = Mesh::from_obj_str(&m.to_obj_string()).unwrap();
        assert_eq!(back, m);
    }
}
