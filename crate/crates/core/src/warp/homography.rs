use nalgebra::{DMatrix, Matrix3, Point2, Vector3};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomographyError {
    #[error("need at least 4 correspondences, got {0}")]
    TooFewPoints(usize),
    #[error("source and destination point counts differ ({0} vs {1})")]
    CountMismatch(usize, usize),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("homography is not invertible (|det| = {0:e})")]
    Singular(f64),
    #[error("non-finite input coordinate")]
    NonFinite,
}

/// Planar projective map `p' ~ H p`, scaled so that `h33 = 1` when possible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

const MIN_DET: f64 = 1e-12;

impl Homography {
    pub fn identity() -> Self {
        Homography(Matrix3::identity())
    }

    /// Wraps and normalizes a matrix, rejecting singular ones.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, HomographyError> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(HomographyError::NonFinite);
        }
        let h = normalize(m);
        let det = h.determinant();
        if det.is_nan() || det.abs() <= MIN_DET {
            return Err(HomographyError::Singular(det.abs()));
        }
        Ok(Homography(h))
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Homography(Matrix3::new(1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0))
    }

    pub fn scaling(sx: f64, sy: f64) -> Self {
        Homography(Matrix3::new(sx, 0.0, 0.0, 0.0, sy, 0.0, 0.0, 0.0, 1.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Maps a point, returning the image and the homogeneous weight `w`.
    pub fn apply_with_weight(&self, p: &Point2<f64>) -> (Point2<f64>, f64) {
        let h = &self.0;
        let x = h[(0, 0)] * p.x + h[(0, 1)] * p.y + h[(0, 2)];
        let y = h[(1, 0)] * p.x + h[(1, 1)] * p.y + h[(1, 2)];
        let w = h[(2, 0)] * p.x + h[(2, 1)] * p.y + h[(2, 2)];
        (Point2::new(x / w, y / w), w)
    }

    /// Maps a point; `None` when it lands on the line at infinity.
    pub fn apply(&self, p: &Point2<f64>) -> Option<Point2<f64>> {
        let (q, w) = self.apply_with_weight(p);
        if w.abs() < 1e-300 || !q.x.is_finite() || !q.y.is_finite() {
            None
        } else {
            Some(q)
        }
    }

    pub fn inverse(&self) -> Result<Homography, HomographyError> {
        let det = self.0.determinant();
        if det.is_nan() || det.abs() <= MIN_DET {
            return Err(HomographyError::Singular(det.abs()));
        }
        let inv = self
            .0
            .try_inverse()
            .ok_or(HomographyError::Singular(self.0.determinant().abs()))?;
        Homography::from_matrix(inv)
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn after(&self, first: &Homography) -> Homography {
        Homography(normalize(self.0 * first.0))
    }
}

fn normalize(m: Matrix3<f64>) -> Matrix3<f64> {
    let h33 = m[(2, 2)];
    if h33.abs() > 1e-12 * m.abs().max() {
        m / h33
    } else {
        m / m.norm()
    }
}

/// Similarity moving the centroid to the origin with mean distance sqrt(2).
fn conditioning(points: &[Point2<f64>]) -> Result<Matrix3<f64>, HomographyError> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if !(mean_dist > 0.0 && mean_dist.is_finite()) {
        return Err(HomographyError::Degenerate("all points coincide".into()));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn has_collinear_triple(points: &[Point2<f64>]) -> bool {
    let n = points.len();
    let scale = points
        .iter()
        .flat_map(|a| points.iter().map(move |b| (a - b).norm()))
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (a, b, c) = (points[i], points[j], points[k]);
                let area2 = ((b - a).perp(&(c - a))).abs();
                if area2 <= 1e-10 * scale * scale {
                    return true;
                }
            }
        }
    }
    false
}

/// Normalized DLT: both point sets are conditioned (centroid at origin, mean
/// distance sqrt(2)), the stacked 2n x 9 design matrix is solved by SVD and
/// the solution de-conditioned. Exact for four points in general position,
/// least squares (algebraic error) for more.
pub fn estimate_homography(src: &[Point2<f64>], dst: &[Point2<f64>]) -> Result<Homography, HomographyError> {
    if src.len() != dst.len() {
        return Err(HomographyError::CountMismatch(src.len(), dst.len()));
    }
    let n = src.len();
    if n < 4 {
        return Err(HomographyError::TooFewPoints(n));
    }
    if !src.iter().chain(dst).all(|p| p.x.is_finite() && p.y.is_finite()) {
        return Err(HomographyError::NonFinite);
    }
    if n == 4 && (has_collinear_triple(src) || has_collinear_triple(dst)) {
        return Err(HomographyError::Degenerate("three of the four points are collinear".into()));
    }
    let t_src = conditioning(src)?;
    let t_dst = conditioning(dst)?;

    // at least 9 rows so the SVD exposes the full right singular basis
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (p, q)) in src.iter().zip(dst).enumerate() {
        let ps = t_src * Vector3::new(p.x, p.y, 1.0);
        let qs = t_dst * Vector3::new(q.x, q.y, 1.0);
        let (x, y) = (ps.x, ps.y);
        let (u, v) = (qs.x, qs.y);
        let r0 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let r1 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for c in 0..9 {
            a[(2 * i, c)] = r0[c];
            a[(2 * i + 1, c)] = r1[c];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| HomographyError::Degenerate("SVD failed".into()))?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[i].total_cmp(&sv[j]));
    let smallest = order[0];
    let second = order[1];
    let largest = order[order.len() - 1];
    if sv[second] <= 1e-10 * sv[largest] {
        return Err(HomographyError::Degenerate(
            "design matrix has a null space of dimension > 1".into(),
        ));
    }
    let h = v_t.row(smallest);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let t_dst_inv = t_dst
        .try_inverse()
        .ok_or_else(|| HomographyError::Degenerate("conditioning not invertible".into()))?;
    Homography::from_matrix(t_dst_inv * hn * t_src)
}

/// Mean symmetric transfer error of `h` over the correspondences.
pub fn symmetric_transfer_error(h: &Homography, src: &[Point2<f64>], dst: &[Point2<f64>]) -> f64 {
    let Ok(inv) = h.inverse() else {
        return f64::INFINITY;
    };
    let mut total = 0.0;
    for (p, q) in src.iter().zip(dst) {
        let fwd = h.apply(p).map(|x| (x - q).norm()).unwrap_or(f64::INFINITY);
        let bwd = inv.apply(q).map(|x| (x - p).norm()).unwrap_or(f64::INFINITY);
        total += fwd + bwd;
    }
    total / (2.0 * src.len() as f64)
}
