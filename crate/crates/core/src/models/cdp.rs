use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{clamped_sqrt, with_magnitude};
use crate::error::{Error, Result};
use crate::fft;
use crate::field::{ComplexField, RealImage};

/// How modulation masks are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskLaw {
    /// Unit-modulus phase masks `exp(i 2 pi g)`, `g ~ N(0, 1)`.
    #[default]
    GaussianPhase,
}

fn default_masks() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdpConfig {
    #[serde(default = "default_masks")]
    pub masks: usize,
    #[serde(default)]
    pub mask_seed: u64,
    #[serde(default)]
    pub law: MaskLaw,
}

impl Default for CdpConfig {
    fn default() -> Self {
        Self { masks: 5, mask_seed: 0, law: MaskLaw::GaussianPhase }
    }
}

/// Coded diffraction patterns: `I_l = |F(u * d_l)|^2`.
#[derive(Clone, Debug)]
pub struct CdpModel {
    dims: (usize, usize),
    masks: Vec<ComplexField>,
    mask_seed: u64,
}

impl CdpModel {
    pub fn new(dims: (usize, usize), cfg: &CdpConfig) -> Result<Self> {
        if cfg.masks == 0 {
            return Err(Error::Argument("CDP needs at least one mask".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.mask_seed);
        let masks = (0..cfg.masks)
            .map(|_| {
                ComplexField::from_fn(dims.0, dims.1, |_, _| {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * g)
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { dims, masks, mask_seed: cfg.mask_seed })
    }

    /// Use explicit masks; each must be unit-modulus everywhere.
    pub fn from_masks(masks: Vec<ComplexField>) -> Result<Self> {
        let first = masks.first().ok_or_else(|| Error::Argument("CDP needs at least one mask".into()))?;
        let dims = first.dims();
        for m in &masks {
            crate::error::check_dims(dims, m.dims())?;
            if m.data().iter().any(|z| (z.norm() - 1.0).abs() > 1e-12) {
                return Err(Error::Argument("CDP masks must be unit-modulus".into()));
            }
        }
        Ok(Self { dims, masks, mask_seed: 0 })
    }

    /// A single all-ones mask (plain Fourier magnitudes, no padding).
    pub fn identity(dims: (usize, usize)) -> Result<Self> {
        Self::from_masks(vec![ComplexField::from_fn(dims.0, dims.1, |_, _| Complex64::new(1.0, 0.0))?])
    }

    pub fn object_dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn mask_count(&self) -> usize {
        self.masks.len()
    }

    pub fn masks(&self) -> &[ComplexField] {
        &self.masks
    }

    pub fn mask_seed(&self) -> u64 {
        self.mask_seed
    }

    fn modulate(u: &ComplexField, d: &ComplexField) -> ComplexField {
        let mut z = u.clone();
        z.data_mut().iter_mut().zip(d.data()).for_each(|(a, b)| *a *= b);
        z
    }

    fn demodulate(z: &mut ComplexField, d: &ComplexField) {
        z.data_mut().iter_mut().zip(d.data()).for_each(|(a, b)| *a *= b.conj());
    }

    pub(crate) fn apply(&self, u: &ComplexField) -> Vec<ComplexField> {
        self.masks
            .par_iter()
            .map(|d| {
                let mut z = Self::modulate(u, d);
                fft::fft2_inplace(&mut z);
                z
            })
            .collect()
    }

    pub(crate) fn adjoint(&self, z: &[ComplexField]) -> ComplexField {
        let parts: Vec<ComplexField> = self
            .masks
            .par_iter()
            .zip(z)
            .map(|(d, zl)| {
                let mut x = zl.clone();
                fft::ifft2_inplace(&mut x);
                Self::demodulate(&mut x, d);
                x
            })
            .collect();
        sum_fields(parts)
    }

    /// Per-mask magnitude replacement, demodulation and uniform averaging.
    pub(crate) fn project(&self, v: &ComplexField, planes: &[RealImage]) -> (ComplexField, f64) {
        let parts: Vec<(ComplexField, f64)> = self
            .masks
            .par_iter()
            .zip(planes)
            .map(|(d, i)| {
                let mut z = Self::modulate(v, d);
                fft::fft2_inplace(&mut z);
                let mut sq = 0.0;
                for (a, &b) in z.data_mut().iter_mut().zip(i.data()) {
                    sq += (b - a.norm_sqr()).powi(2);
                    *a = with_magnitude(*a, clamped_sqrt(b));
                }
                fft::ifft2_inplace(&mut z);
                Self::demodulate(&mut z, d);
                (z, sq)
            })
            .collect();
        let sq = parts.iter().map(|p| p.1).sum();
        let mut out = sum_fields(parts.into_iter().map(|p| p.0).collect());
        out.scale(Complex64::new(1.0 / self.masks.len() as f64, 0.0));
        (out, sq)
    }

    pub(crate) fn init(&self, planes: &[RealImage]) -> Result<ComplexField> {
        let z: Vec<ComplexField> = planes
            .iter()
            .map(|i| {
                ComplexField::from_vec(
                    i.height(),
                    i.width(),
                    i.data().iter().map(|&v| Complex64::new(clamped_sqrt(v), 0.0)).collect(),
                )
            })
            .collect::<Result<_>>()?;
        let mut out = self.adjoint(&z);
        out.scale(Complex64::new(1.0 / self.masks.len() as f64, 0.0));
        Ok(out)
    }
}

/// Ordered sum, so the result does not depend on thread scheduling.
pub(crate) fn sum_fields(parts: Vec<ComplexField>) -> ComplexField {
    let mut it = parts.into_iter();
    let mut acc = it.next().expect("at least one part");
    for p in it {
        acc.data_mut().iter_mut().zip(p.data()).for_each(|(a, b)| *a += b);
    }
    acc
}
