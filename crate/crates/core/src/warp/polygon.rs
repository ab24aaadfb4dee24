use nalgebra::Point2;

/// Convex polygon with counter-clockwise vertices (in the x-right, y-down
/// pixel frame this appears clockwise on screen; only the sign convention
/// matters here).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polygon {
    vertices: Vec<Point2<f64>>,
}

#[inline]
fn cross(o: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Indices of the convex hull vertices in counter-clockwise order
/// (monotone chain). Collinear boundary points are dropped.
pub fn convex_hull_indices(points: &[Point2<f64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        points[a]
            .x
            .total_cmp(&points[b].x)
            .then(points[a].y.total_cmp(&points[b].y))
    });
    idx.dedup_by(|a, b| points[*a] == points[*b]);
    if idx.len() < 3 {
        return idx;
    }
    let mut lower: Vec<usize> = Vec::new();
    for &i in &idx {
        while lower.len() >= 2
            && cross(&points[lower[lower.len() - 2]], &points[lower[lower.len() - 1]], &points[i]) <= 0.0
        {
            lower.pop();
        }
        lower.push(i);
    }
    let mut upper: Vec<usize> = Vec::new();
    for &i in idx.iter().rev() {
        while upper.len() >= 2
            && cross(&points[upper[upper.len() - 2]], &points[upper[upper.len() - 1]], &points[i]) <= 0.0
        {
            upper.pop();
        }
        upper.push(i);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

impl Polygon {
    /// Convex hull of the points; `None` if it has fewer than 3 vertices or
    /// (numerically) zero area.
    pub fn hull(points: &[Point2<f64>]) -> Option<Polygon> {
        let idx = convex_hull_indices(points);
        if idx.len() < 3 {
            return None;
        }
        let poly = Polygon {
            vertices: idx.into_iter().map(|i| points[i]).collect(),
        };
        let scale = poly.diameter().max(f64::MIN_POSITIVE);
        if poly.area() <= 1e-9 * scale * scale {
            return None;
        }
        Some(poly)
    }

    pub fn vertices(&self) -> &[Point2<f64>] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut a = 0.0;
        for i in 0..n {
            let p = &self.vertices[i];
            let q = &self.vertices[(i + 1) % n];
            a += p.x * q.y - q.x * p.y;
        }
        a / 2.0
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    pub fn centroid(&self) -> Point2<f64> {
        let n = self.vertices.len().max(1) as f64;
        let s = self.vertices.iter().fold(nalgebra::Vector2::zeros(), |acc, p| acc + p.coords);
        Point2::from(s / n)
    }

    /// Inclusive point-in-convex-polygon test.
    pub fn contains(&self, p: &Point2<f64>) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        for i in 0..n {
            if cross(&self.vertices[i], &self.vertices[(i + 1) % n], p) < 0.0 {
                return false;
            }
        }
        true
    }

    /// Pixel bounds `(x0, y0, x1, y1)` (inclusive) of centers that may fall
    /// inside the polygon, clipped to a `width x height` frame.
    pub fn pixel_bounds(&self, width: u32, height: u32) -> Option<(u32, u32, u32, u32)> {
        if self.vertices.len() < 3 || width == 0 || height == 0 {
            return None;
        }
        let min_x = self.vertices.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let max_x = self.vertices.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        let min_y = self.vertices.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let max_y = self.vertices.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
        let x0 = (min_x - 0.5).ceil().max(0.0);
        let y0 = (min_y - 0.5).ceil().max(0.0);
        let x1 = (max_x - 0.5).floor().min(width as f64 - 1.0);
        let y1 = (max_y - 0.5).floor().min(height as f64 - 1.0);
        if !(x0 <= x1 && y0 <= y1) {
            return None;
        }
        Some((x0 as u32, y0 as u32, x1 as u32, y1 as u32))
    }

    pub fn map(&self, f: impl Fn(&Point2<f64>) -> Point2<f64>) -> Polygon {
        Polygon {
            vertices: self.vertices.iter().map(f).collect(),
        }
    }

    /// Euclidean distance from `p` to the polygon boundary.
    pub fn boundary_distance(&self, p: &Point2<f64>) -> f64 {
        let n = self.vertices.len();
        let mut best = f64::INFINITY;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let ab = b - a;
            let t = ((p - a).dot(&ab) / ab.norm_squared().max(f64::MIN_POSITIVE)).clamp(0.0, 1.0);
            best = best.min((p - (a + ab * t)).norm());
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point2<f64>> {
        v.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    #[test]
    fn square_hull() {
        let p = Polygon::hull(&pts(&[(0.0, 0.0), (4.0, 0.0), (4.0, 4.0), (0.0, 4.0)])).unwrap();
        assert_eq!(p.vertices().len(), 4);
        assert_eq!(p.area(), 16.0);
        assert!(p.contains(&Point2::new(2.0, 2.0)));
        assert!(p.contains(&Point2::new(0.0, 2.0)));
        assert!(!p.contains(&Point2::new(4.1, 2.0)));
    }

    #[test]
    fn collinear_is_degenerate() {
        assert!(Polygon::hull(&pts(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)])).is_none());
        assert!(Polygon::hull(&pts(&[(0.0, 0.0), (1.0, 1.0)])).is_none());
        assert!(Polygon::hull(&pts(&[(1.0, 1.0), (1.0, 1.0), (1.0, 1.0)])).is_none());
    }

    /// Brute-force hull: a point is a hull vertex iff it is not inside (or
    /// on) the triangle spanned by any three other points, and not between
    /// two others on a segment.
    fn brute_force_hull_vertices(points: &[Point2<f64>]) -> Vec<usize> {
        let n = points.len();
        let in_tri = |p: &Point2<f64>, a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>| {
            let d1 = cross(a, b, p);
            let d2 = cross(b, c, p);
            let d3 = cross(c, a, p);
            let neg = d1 < 0.0 || d2 < 0.0 || d3 < 0.0;
            let pos = d1 > 0.0 || d2 > 0.0 || d3 > 0.0;
            !(neg && pos)
        };
        (0..n)
            .filter(|&i| {
                for a in 0..n {
                    for b in 0..n {
                        for c in 0..n {
                            let distinct = a != i && b != i && c != i && a != b && b != c && a != c;
                            if distinct
                                && cross(&points[a], &points[b], &points[c]) != 0.0
                                && in_tri(&points[i], &points[a], &points[b], &points[c]) {
                                return false;
                            }
                        }
                    }
                }
                true
            })
            .collect()
    }

    #[test]
    fn interior_point_excluded_matches_brute_force() {
        let p = pts(&[(0.0, 0.0), (10.0, 1.0), (3.0, 4.0), (9.0, 9.0), (1.0, 8.0)]);
        let mut hull = convex_hull_indices(&p);
        hull.sort();
        let brute = brute_force_hull_vertices(&p);
        assert_eq!(hull, brute);
        assert_eq!(hull, vec![0, 1, 3, 4]);
    }

    proptest::proptest! {
        #[test]
        fn hull_matches_brute_force(raw in proptest::collection::vec((0i32..50, 0i32..50), 3..9)) {
            let p: Vec<Point2<f64>> = raw.iter().map(|&(x, y)| Point2::new(x as f64, y as f64)).collect();
            let mut uniq = p.clone();
            uniq.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
            uniq.dedup();
            let mut hull: Vec<Point2<f64>> = convex_hull_indices(&uniq).into_iter().map(|i| uniq[i]).collect();
            let mut brute: Vec<Point2<f64>> = brute_force_hull_vertices(&uniq).into_iter().map(|i| uniq[i]).collect();
            if hull.len() >= 3 {
                hull.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
                brute.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
                proptest::prop_assert_eq!(hull, brute);
            }
        }
    }
}
