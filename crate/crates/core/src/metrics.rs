//! Fréchet distance between Gaussian feature statistics, PSNR and feature
//! matrix files.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use image::RgbImage;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::imaging::Mask;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("need at least 2 feature rows, got {0}")]
    TooFewSamples(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("covariance is not positive semi-definite (eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("image sizes differ: {0:?} vs {1:?}")]
    SizeMismatch((u32, u32), (u32, u32)),
    #[error("feature file: {0}")]
    Format(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Eigenvalues below this are treated as a genuinely indefinite matrix.
const PSD_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub n: usize,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Mean and unbiased (1/(n-1)) covariance of the rows of `features`.
pub fn gaussian_stats(features: &DMatrix<f64>) -> Result<GaussianStats, MetricsError> {
    let n = features.nrows();
    if n < 2 {
        return Err(MetricsError::TooFewSamples(n));
    }
    let mean: DVector<f64> = features.row_mean().transpose();
    let mut centered = features.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centered.transpose() * &centered / (n - 1) as f64;
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok(GaussianStats { mean, cov, n })
}

/// Symmetric square root with negative eigenvalues clipped to zero.
fn sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>, MetricsError> {
    let eig = m.clone().symmetric_eigen();
    if let Some(&min) = eig.eigenvalues.iter().min_by(|a, b| a.total_cmp(b)) {
        if min < -PSD_TOLERANCE {
            return Err(MetricsError::NotPsd(min));
        }
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

/// `||m_a - m_b||^2 + Tr(C_a + C_b - 2 (C_a C_b)^(1/2))`.
///
/// `Tr (C_a C_b)^(1/2)` is the sum of the square roots of the eigenvalues of
/// the symmetric `C_a^(1/2) C_b C_a^(1/2)`, taken here as the singular
/// values of `C_a^(1/2) C_b^(1/2)` so that small eigenvalues are not
/// squared and then rooted again.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64, MetricsError> {
    if a.dim() != b.dim() || a.cov.nrows() != b.cov.nrows() {
        return Err(MetricsError::DimensionMismatch(a.dim(), b.dim()));
    }
    let sa = sqrt_psd(&a.cov)?;
    let sb = sqrt_psd(&b.cov)?;
    let trace_sqrt: f64 = (&sa * &sb).singular_values().iter().sum();
    let mean_term = (&a.mean - &b.mean).norm_squared();
    let d = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * trace_sqrt;
    Ok(d.max(0.0))
}

fn mse_to_psnr(sum_sq: f64, count: usize) -> f64 {
    if sum_sq == 0.0 {
        return f64::INFINITY;
    }
    let mse = sum_sq / count as f64;
    10.0 * (255.0f64 * 255.0 / mse).log10()
}

/// Peak signal-to-noise ratio over all channels of two 8-bit images;
/// `+inf` when they are identical.
pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64, MetricsError> {
    if a.dimensions() != b.dimensions() {
        return Err(MetricsError::SizeMismatch(a.dimensions(), b.dimensions()));
    }
    let sum_sq: f64 = a
        .as_raw()
        .iter()
        .zip(b.as_raw())
        .map(|(&x, &y)| (x as f64 - y as f64).powi(2))
        .sum();
    Ok(mse_to_psnr(sum_sq, a.as_raw().len()))
}

/// PSNR restricted to pixels set in `mask`; `None` when the mask is empty.
pub fn psnr_masked(a: &RgbImage, b: &RgbImage, mask: &Mask) -> Result<Option<f64>, MetricsError> {
    if a.dimensions() != b.dimensions() {
        return Err(MetricsError::SizeMismatch(a.dimensions(), b.dimensions()));
    }
    if (mask.width(), mask.height()) != a.dimensions() {
        return Err(MetricsError::SizeMismatch(a.dimensions(), (mask.width(), mask.height())));
    }
    let mut sum_sq = 0.0;
    let mut count = 0;
    for (i, (pa, pb)) in a.pixels().zip(b.pixels()).enumerate() {
        if mask.as_slice()[i] {
            for c in 0..3 {
                sum_sq += (pa[c] as f64 - pb[c] as f64).powi(2);
            }
            count += 3;
        }
    }
    Ok((count > 0).then(|| mse_to_psnr(sum_sq, count)))
}

/// Magic word of binary feature files ("FEAT" read as a little-endian u32).
pub const FEATURE_MAGIC: u32 = u32::from_le_bytes(*b"FEAT");

/// Reads a feature matrix, detecting the binary format by its magic word
/// and falling back to CSV.
pub fn read_features(path: impl AsRef<Path>) -> Result<DMatrix<f64>, MetricsError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() >= 4 && bytes[..4] == FEATURE_MAGIC.to_le_bytes() {
        read_features_bin(&bytes[..])
    } else {
        read_features_csv(&bytes[..])
    }
}

/// CSV with one header row naming the dimensions.
pub fn read_features_csv(reader: impl Read) -> Result<DMatrix<f64>, MetricsError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let d = rdr.headers()?.len();
    let mut data = Vec::new();
    let mut n = 0;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != d {
            return Err(MetricsError::Format(format!("row {} has {} fields, header has {d}", i + 1, record.len())));
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| MetricsError::Format(format!("row {}: {field:?} is not a number", i + 1)))?;
            data.push(v);
        }
        n += 1;
    }
    Ok(DMatrix::from_row_slice(n, d, &data))
}

pub fn write_features_csv(features: &DMatrix<f64>, writer: impl Write) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record((0..features.ncols()).map(|j| format!("f{j}")))?;
    for row in features.row_iter() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// 16-byte header `[magic, n, d, reserved]` of little-endian u32, then
/// `n * d` little-endian f32 values in row-major order.
pub fn read_features_bin(mut reader: impl Read) -> Result<DMatrix<f64>, MetricsError> {
    let magic = reader.read_u32::<LittleEndian>()?;
    if magic != FEATURE_MAGIC {
        return Err(MetricsError::Format(format!("bad magic {magic:#010x}")));
    }
    let n = reader.read_u32::<LittleEndian>()? as usize;
    let d = reader.read_u32::<LittleEndian>()? as usize;
    let _reserved = reader.read_u32::<LittleEndian>()?;
    let len = n
        .checked_mul(d)
        .ok_or_else(|| MetricsError::Format("n * d overflows".into()))?;
    let mut values = vec![0f32; len];
    reader
        .read_f32_into::<LittleEndian>(&mut values)
        .map_err(|e| MetricsError::Format(format!("expected {len} values: {e}")))?;
    let data: Vec<f64> = values.into_iter().map(f64::from).collect();
    Ok(DMatrix::from_row_slice(n, d, &data))
}

pub fn write_features_bin(features: &DMatrix<f64>, writer: impl Write) -> Result<(), MetricsError> {
    let mut w = BufWriter::new(writer);
    w.write_u32::<LittleEndian>(FEATURE_MAGIC)?;
    w.write_u32::<LittleEndian>(features.nrows() as u32)?;
    w.write_u32::<LittleEndian>(features.ncols() as u32)?;
    w.write_u32::<LittleEndian>(0)?;
    for row in features.row_iter() {
        for v in row.iter() {
            w.write_f32::<LittleEndian>(*v as f32)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Convenience for files: reads both feature sets and returns their distance.
pub fn fid_from_files(a: impl AsRef<Path>, b: impl AsRef<Path>) -> Result<f64, MetricsError> {
    let fa = read_features(a)?;
    let fb = read_features(b)?;
    if fa.ncols() != fb.ncols() {
        return Err(MetricsError::DimensionMismatch(fa.ncols(), fb.ncols()));
    }
    frechet_distance(&gaussian_stats(&fa)?, &gaussian_stats(&fb)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_matrix(n: usize, d: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, d, |_, _| rng.random_range(-3.0..3.0))
    }

    /// Two passes with plain loops.
    fn naive_cov(x: &DMatrix<f64>) -> (Vec<f64>, Vec<Vec<f64>>) {
        let (n, d) = x.shape();
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for j in 0..d {
                mean[j] += x[(i, j)];
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut cov = vec![vec![0.0; d]; d];
        for i in 0..n {
            for a in 0..d {
                for b in 0..d {
                    cov[a][b] += (x[(i, a)] - mean[a]) * (x[(i, b)] - mean[b]);
                }
            }
        }
        for row in &mut cov {
            for v in row {
                *v /= (n - 1) as f64;
            }
        }
        (mean, cov)
    }

    #[test]
    fn two_points() {
        let x = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 0.0]);
        let s = gaussian_stats(&x).unwrap();
        assert_eq!(s.mean.as_slice(), &[1.0, 0.0]);
        assert_eq!(s.cov, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn constant_features_have_zero_covariance() {
        let x = DMatrix::from_element(7, 3, 4.5);
        assert!(gaussian_stats(&x).unwrap().cov.iter().all(|v| *v == 0.0));
        assert!(matches!(
            gaussian_stats(&DMatrix::zeros(1, 3)),
            Err(MetricsError::TooFewSamples(1))
        ));
    }

    #[test]
    fn stats_match_two_pass_oracle() {
        let x = random_matrix(100, 5, 2);
        let s = gaussian_stats(&x).unwrap();
        let (mean, cov) = naive_cov(&x);
        for j in 0..5 {
            assert!((s.mean[j] - mean[j]).abs() < 1e-10);
            for (k, c) in cov[j].iter().enumerate() {
                assert!((s.cov[(j, k)] - c).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn identical_stats_give_zero() {
        let s = gaussian_stats(&random_matrix(50, 6, 3)).unwrap();
        assert!(frechet_distance(&s, &s).unwrap().abs() < 1e-10);
    }

    #[test]
    fn indefinite_covariance_is_rejected() {
        let good = gaussian_stats(&random_matrix(20, 2, 4)).unwrap();
        let mut bad = good.clone();
        bad.cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -0.5]);
        assert!(matches!(frechet_distance(&good, &bad), Err(MetricsError::NotPsd(_))));
        let mut other_dim = good.clone();
        other_dim.mean = DVector::zeros(3);
        assert!(matches!(
            frechet_distance(&good, &other_dim),
            Err(MetricsError::DimensionMismatch(2, 3))
        ));
    }

    #[test]
    fn psnr_closed_forms() {
        let a = RgbImage::from_pixel(8, 8, image::Rgb([10, 20, 30]));
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b = RgbImage::from_pixel(8, 8, image::Rgb([11, 21, 31]));
        let p = psnr(&a, &b).unwrap();
        assert!((p - 20.0 * 255f64.log10()).abs() < 1e-12);
        assert!((p - 48.13).abs() < 0.005);
        assert!(psnr(&a, &RgbImage::new(4, 4)).is_err());
    }

    #[test]
    fn psnr_matches_direct_mse() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let a = RgbImage::from_fn(16, 9, |_, _| image::Rgb(rng.random()));
        let b = RgbImage::from_fn(16, 9, |_, _| image::Rgb(rng.random()));
        let mut sse = 0.0;
        for (pa, pb) in a.pixels().zip(b.pixels()) {
            for c in 0..3 {
                let d = pa[c] as f64 - pb[c] as f64;
                sse += d * d;
            }
        }
        let want = 10.0 * (255.0 * 255.0 / (sse / (16.0 * 9.0 * 3.0))).log10();
        assert!((psnr(&a, &b).unwrap() - want).abs() < 1e-9);
        let full = Mask::from_fn(16, 9, |_, _| true);
        assert!((psnr_masked(&a, &b, &full).unwrap().unwrap() - want).abs() < 1e-9);
        assert_eq!(psnr_masked(&a, &b, &Mask::new(16, 9)).unwrap(), None);
    }

    #[test]
    fn feature_files_round_trip() {
        let x = DMatrix::from_row_slice(3, 2, &[0.5, -1.25, 3.0, 4.0, 1e-3, 2.5]);
        let mut buf = Vec::new();
        write_features_bin(&x, &mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 3 * 2 * 4);
        assert_eq!(&buf[..4], b"FEAT");
        let back = read_features_bin(&buf[..]).unwrap();
        assert!((back - &x).abs().max() < 1e-6);

        let mut csv_buf = Vec::new();
        write_features_csv(&x, &mut csv_buf).unwrap();
        assert!(String::from_utf8_lossy(&csv_buf).starts_with("f0,f1\n"));
        assert_eq!(read_features_csv(&csv_buf[..]).unwrap(), x);

        assert!(read_features_csv("a,b\n1,2\n3\n".as_bytes()).is_err());
        assert!(read_features_bin(&buf[..20]).is_err());
    }
}
