//! PSNR, SSIM and wrapped-phase RMSE.
//!
//! SSIM uses the canonical Gaussian-window setup: 11x11 window with
//! sigma 1.5, K1 = 0.01, K2 = 0.03, averaged over all fully-contained
//! windows.

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::field::RealImage;

/// Returned by [`psnr`] for identical images; also the upper clamp.
pub const PSNR_CAP_DB: f64 = 999.0;

/// SSIM constants, recorded alongside every scored run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SsimParams {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self { window: 11, sigma: 1.5, k1: 0.01, k2: 0.03 }
    }
}

pub fn mse(a: &RealImage, b: &RealImage) -> Result<f64> {
    check_dims(a.dims(), b.dims())?;
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

/// `10 log10(peak^2 / MSE)`, capped at [`PSNR_CAP_DB`].
pub fn psnr(reference: &RealImage, test: &RealImage, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::Argument(format!("peak must be positive, got {peak}")));
    }
    let m = mse(reference, test)?;
    if m == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / m).log10()).min(PSNR_CAP_DB))
}

/// PSNR with the peak taken from the reference maximum.
pub fn psnr_auto(reference: &RealImage, test: &RealImage) -> Result<f64> {
    let peak = reference.max();
    psnr(reference, test, if peak > 0.0 { peak } else { 1.0 })
}

/// SSIM with dynamic range `max(max(a), max(b))` (1 if that is not positive).
pub fn ssim(a: &RealImage, b: &RealImage) -> Result<f64> {
    let range = a.max().max(b.max());
    ssim_with(a, b, if range > 0.0 { range } else { 1.0 }, &SsimParams::default())
}

pub fn ssim_with(a: &RealImage, b: &RealImage, range: f64, p: &SsimParams) -> Result<f64> {
    check_dims(a.dims(), b.dims())?;
    let (h, w) = a.dims();
    if h < p.window || w < p.window {
        return Err(Error::Argument(format!("image {h}x{w} smaller than the {}x{} SSIM window", p.window, p.window)));
    }
    let kernel = gaussian_kernel(p.window, p.sigma);
    let c1 = (p.k1 * range).powi(2);
    let c2 = (p.k2 * range).powi(2);

    let prod =
        |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect() };
    let mu_a = filter_valid(a.data(), h, w, &kernel);
    let mu_b = filter_valid(b.data(), h, w, &kernel);
    let e_aa = filter_valid(&prod(&|x, _| x * x), h, w, &kernel);
    let e_bb = filter_valid(&prod(&|_, y| y * y), h, w, &kernel);
    let e_ab = filter_valid(&prod(&|x, y| x * y), h, w, &kernel);

    let n = mu_a.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let va = e_aa[i] - ma * ma;
        let vb = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
        let den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        total += num / den;
    }
    Ok(total / n as f64)
}

/// Normalized 1-D Gaussian taps of odd length `size`.
pub(crate) fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let mut k: Vec<f64> = (0..size).map(|i| (-((i as f64 - half).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable 'valid' correlation: output is `(h-k+1) x (w-k+1)`.
fn filter_valid(src: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut tmp = vec![0.0; h * ow];
    for r in 0..h {
        let row = &src[r * w..(r + 1) * w];
        for c in 0..ow {
            tmp[r * ow + c] = k.iter().zip(&row[c..c + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                acc += kv * tmp[(r + j) * ow + c];
            }
            out[r * ow + c] = acc;
        }
    }
    out
}

/// RMSE of the phase difference wrapped into (-pi, pi].
pub fn wrapped_phase_rmse(a: &RealImage, b: &RealImage) -> Result<f64> {
    check_dims(a.dims(), b.dims())?;
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| wrap_angle(x - y).powi(2)).sum();
    Ok((s / a.len() as f64).sqrt())
}

pub fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::PI;
    let mut y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y += 2.0 * PI;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_image(h: usize, w: usize, seed: u64) -> RealImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RealImage::from_fn(h, w, |_, _| rng.random::<f64>()).unwrap()
    }

    /// Smooth "natural" patch: low-frequency sinusoids plus an edge.
    fn natural_patch(n: usize) -> RealImage {
        RealImage::from_fn(n, n, |r, c| {
            let (x, y) = (r as f64 / n as f64, c as f64 / n as f64);
            let edge = if x + 0.5 * y > 0.6 { 0.3 } else { 0.0 };
            0.4 + 0.2 * (6.0 * x).sin() * (4.0 * y).cos() + edge
        })
        .unwrap()
    }

    #[test]
    fn psnr_identical_is_cap() {
        let a = random_image(8, 8, 1);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), PSNR_CAP_DB);
    }

    #[test]
    fn psnr_uniform_offset_is_20_db() {
        let a = RealImage::from_fn(16, 16, |r, c| ((r * 16 + c) as f64 / 300.0).min(0.9)).unwrap();
        let b = a.map(|v| v + 0.1);
        let p = psnr(&a, &b, 1.0).unwrap();
        assert!((p - 20.0).abs() < 1e-9, "{p}");
    }

    #[test]
    fn psnr_matches_direct_formula() {
        let a = random_image(20, 13, 2);
        let b = random_image(20, 13, 3);
        let mut s = 0.0;
        for i in 0..a.len() {
            let d = a.data()[i] - b.data()[i];
            s += d * d;
        }
        let oracle = 10.0 * (0.8f64 * 0.8 / (s / a.len() as f64)).log10();
        assert!((psnr(&a, &b, 0.8).unwrap() - oracle).abs() < 1e-9);
    }

    #[test]
    fn psnr_errors() {
        let a = random_image(4, 4, 1);
        let b = random_image(4, 5, 1);
        assert!(matches!(psnr(&a, &b, 1.0), Err(Error::DimMismatch { .. })));
        assert!(psnr(&a, &a, 0.0).is_err());
    }

    #[test]
    fn ssim_self_is_exactly_one() {
        let a = random_image(32, 40, 4);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn ssim_checkerboard_inverse_is_negative() {
        let x = RealImage::from_fn(32, 32, |r, c| ((r + c) % 2) as f64).unwrap();
        let y = x.map(|v| 1.0 - v);
        assert!(ssim(&x, &y).unwrap() < 0.0);
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = random_image(10, 32, 1);
        assert!(matches!(ssim(&a, &a), Err(Error::Argument(_))));
    }

    /// Per-window oracle: explicit 2-D Gaussian weights and direct sums.
    fn ssim_oracle(a: &RealImage, b: &RealImage, range: f64) -> f64 {
        let n = 11usize;
        let sigma: f64 = 1.5;
        let mut w2 = vec![0.0; n * n];
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d2 = (i as f64 - 5.0).powi(2) + (j as f64 - 5.0).powi(2);
                w2[i * n + j] = (-d2 / (2.0 * sigma * sigma)).exp();
                s += w2[i * n + j];
            }
        }
        w2.iter_mut().for_each(|v| *v /= s);
        let c1 = (0.01 * range).powi(2);
        let c2 = (0.03 * range).powi(2);
        let (h, w) = a.dims();
        let mut total = 0.0;
        let mut count = 0;
        for r in 0..=h - n {
            for c in 0..=w - n {
                let (mut ma, mut mb) = (0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        ma += w2[i * n + j] * a.get(r + i, c + j);
                        mb += w2[i * n + j] * b.get(r + i, c + j);
                    }
                }
                let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        let da = a.get(r + i, c + j) - ma;
                        let db = b.get(r + i, c + j) - mb;
                        va += w2[i * n + j] * da * da;
                        vb += w2[i * n + j] * db * db;
                        cov += w2[i * n + j] * da * db;
                    }
                }
                total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
        total / count as f64
    }

    #[test]
    fn ssim_matches_window_oracle() {
        let a = natural_patch(64);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = a.map(|v| {
            let g: f64 = rng.sample(StandardNormal);
            v + 0.05 * g
        });
        let range = a.max().max(b.max());
        let fast = ssim(&a, &b).unwrap();
        let slow = ssim_oracle(&a, &b, range);
        assert!((fast - slow).abs() < 1e-6, "{fast} vs {slow}");
        assert!(fast < 1.0 && fast > 0.0);
    }

    #[test]
    fn wrap_angle_range() {
        use std::f64::consts::PI;
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-15);
        assert!((wrap_angle(2.0 * PI + 0.25) - 0.25).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]
            #[test]
            fn metrics_are_symmetric(seed_a in 0u64..1000, seed_b in 1000u64..2000) {
                let a = random_image(16, 16, seed_a);
                let b = random_image(16, 16, seed_b);
                prop_assert_eq!(psnr(&a, &b, 1.0).unwrap(), psnr(&b, &a, 1.0).unwrap());
                let s1 = ssim(&a, &b).unwrap();
                let s2 = ssim(&b, &a).unwrap();
                prop_assert!((s1 - s2).abs() < 1e-15);
                prop_assert!((-1.0..=1.0).contains(&s1));
            }
        }
    }
}
