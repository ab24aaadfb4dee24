use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{KeypointSet2D, SphericalPose};

/// The 12 azimuth bins used for evaluation sweeps: 0, 30, ..., 330 degrees.
pub const AZIMUTH_RING: [f64; 12] = [0.0, 30.0, 60.0, 90.0, 120.0, 150.0, 180.0, 210.0, 240.0, 270.0, 300.0, 330.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SamplerMode {
    /// Uniform choice among annotated poses; falls back to the hemisphere
    /// at `fallback_radius` when `poses` is empty.
    Empirical {
        poses: Vec<SphericalPose>,
        fallback_radius: f64,
    },
    /// Area-uniform directions on the upper hemisphere at a fixed radius.
    UniformHemisphere { radius: f64 },
    /// Cycles through [`AZIMUTH_RING`] at fixed elevation and radius.
    AzimuthRing { elevation_deg: f64, radius: f64 },
}

/// Seeded viewpoint source. Ring mode is stateful; the other modes only
/// advance the RNG.
#[derive(Debug, Clone)]
pub struct ViewpointSampler {
    mode: SamplerMode,
    rng: ChaCha8Rng,
    ring_index: usize,
}

impl ViewpointSampler {
    pub fn new(mode: SamplerMode, seed: u64) -> Self {
        Self {
            mode,
            rng: ChaCha8Rng::seed_from_u64(seed),
            ring_index: 0,
        }
    }

    /// Starts an azimuth ring at bin `index` (mod 12).
    pub fn with_ring_start(mut self, index: usize) -> Self {
        self.ring_index = index % AZIMUTH_RING.len();
        self
    }

    pub fn mode(&self) -> &SamplerMode {
        &self.mode
    }

    pub fn sample(&mut self) -> SphericalPose {
        match &self.mode {
            SamplerMode::Empirical { poses, fallback_radius } => {
                if poses.is_empty() {
                    hemisphere(&mut self.rng, *fallback_radius)
                } else {
                    poses[self.rng.random_range(0..poses.len())]
                }
            }
            SamplerMode::UniformHemisphere { radius } => hemisphere(&mut self.rng, *radius),
            SamplerMode::AzimuthRing { elevation_deg, radius } => {
                let az = AZIMUTH_RING[self.ring_index];
                self.ring_index = (self.ring_index + 1) % AZIMUTH_RING.len();
                SphericalPose::new(az, *elevation_deg, *radius).expect("ring parameters validated by caller")
            }
        }
    }
}

impl Iterator for ViewpointSampler {
    type Item = SphericalPose;
    fn next(&mut self) -> Option<SphericalPose> {
        Some(self.sample())
    }
}

/// Uniform area on the unit hemisphere: `sin(el)` is uniform on [0, 1).
fn hemisphere(rng: &mut ChaCha8Rng, radius: f64) -> SphericalPose {
    let az = rng.random_range(0.0..360.0);
    let el = rng.random::<f64>().asin().to_degrees();
    SphericalPose::new(az, el, radius).expect("hemisphere draws are in range")
}

/// Independent Gaussian noise of std `sigma` on every normalized
/// coordinate, clamped to [0, 1]. `sigma <= 0` returns the input.
pub fn perturb_keypoints(kps: &KeypointSet2D, sigma: f64, seed: u64) -> KeypointSet2D {
    if sigma.is_nan() || sigma <= 0.0 {
        return kps.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("sigma is positive");
    kps.iter()
        .map(|(name, p)| {
            let x = (p.x + noise.sample(&mut rng)).clamp(0.0, 1.0);
            let y = (p.y + noise.sample(&mut rng)).clamp(0.0, 1.0);
            (name.clone(), nalgebra::Point2::new(x, y))
        })
        .collect()
}
