use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::RealImage;

/// Additive white Gaussian noise at a target measurement SNR.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub snr_db: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(snr_db: f64, seed: u64) -> Self {
        Self { snr_db, seed }
    }

    /// Noise standard deviation for a signal of the given mean square.
    pub fn sigma_for(&self, mean_square: f64) -> f64 {
        (mean_square / 10f64.powf(self.snr_db / 10.0)).sqrt()
    }
}

/// Returns `i + n` with `n ~ N(0, mean(i^2) / 10^(snr/10))`, i.i.d. per pixel.
///
/// The result is not clamped; negative intensities are left for the
/// solvers to handle.
pub fn add_wgn(i: &RealImage, spec: &NoiseSpec) -> Result<RealImage> {
    if !i.is_finite() {
        return Err(Error::Argument("input image contains non-finite values".into()));
    }
    if !spec.snr_db.is_finite() {
        return Err(Error::Argument(format!("snr_db must be finite, got {}", spec.snr_db)));
    }
    let sigma = spec.sigma_for(i.mean_square());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = i.clone();
    for v in out.data_mut() {
        let g: f64 = StandardNormal.sample(&mut rng);
        *v += sigma * g;
    }
    Ok(out)
}
