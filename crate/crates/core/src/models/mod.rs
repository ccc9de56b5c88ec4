//! Measurement operators for the three imaging modalities.
//!
//! Each model provides the noiseless forward map `I = |A u|^2`, the
//! magnitude projection used by alternating projection, and the linear
//! part `A` with its adjoint for gradient-based baselines.

mod cdi;
mod cdp;
mod fpm;

pub use cdi::{CdiConfig, CdiModel};
pub use cdp::{CdpConfig, CdpModel, MaskLaw};
pub use fpm::{FpmConfig, FpmModel};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, RealImage};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Cdi,
    Cdp,
    Fpm,
}

impl std::fmt::Display for Modality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Modality::Cdi => "cdi",
            Modality::Cdp => "cdp",
            Modality::Fpm => "fpm",
        })
    }
}

/// Intensity planes together with the modality that produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet {
    pub modality: Modality,
    pub planes: Vec<RealImage>,
}

impl MeasurementSet {
    pub fn new(modality: Modality, planes: Vec<RealImage>) -> Self {
        Self { modality, planes }
    }

    /// `sqrt(sum_p sum_x I^2)` over all planes.
    pub fn norm(&self) -> f64 {
        self.planes.iter().map(|p| p.norm().powi(2)).sum::<f64>().sqrt()
    }

    pub fn total(&self) -> f64 {
        self.planes.iter().map(|p| p.data().iter().sum::<f64>()).sum()
    }

    pub fn mean_square(&self) -> f64 {
        let n: usize = self.planes.iter().map(|p| p.len()).sum();
        self.planes.iter().map(|p| p.norm().powi(2)).sum::<f64>() / n as f64
    }

    pub fn mean(&self) -> f64 {
        let n: usize = self.planes.iter().map(|p| p.len()).sum();
        self.total() / n as f64
    }

    /// Apply `f` to each plane with its index.
    pub fn map_planes(&self, mut f: impl FnMut(usize, &RealImage) -> Result<RealImage>) -> Result<Self> {
        let planes = self.planes.iter().enumerate().map(|(k, p)| f(k, p)).collect::<Result<_>>()?;
        Ok(Self { modality: self.modality, planes })
    }
}

/// Serializable model description; object dimensions are supplied at build time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelConfig {
    Cdi(CdiConfig),
    Cdp(CdpConfig),
    Fpm(FpmConfig),
}

impl ModelConfig {
    pub fn modality(&self) -> Modality {
        match self {
            ModelConfig::Cdi(_) => Modality::Cdi,
            ModelConfig::Cdp(_) => Modality::Cdp,
            ModelConfig::Fpm(_) => Modality::Fpm,
        }
    }

    /// Build the operator for an object (CDI, CDP) or high-resolution (FPM) grid.
    pub fn build(&self, object_dims: (usize, usize)) -> Result<Model> {
        Ok(match self {
            ModelConfig::Cdi(c) => Model::Cdi(CdiModel::new(object_dims, c)?),
            ModelConfig::Cdp(c) => Model::Cdp(CdpModel::new(object_dims, c)?),
            ModelConfig::Fpm(c) => Model::Fpm(FpmModel::new(object_dims, c)?),
        })
    }
}

/// The forward operator `A` of one modality.
#[derive(Clone, Debug)]
pub enum Model {
    Cdi(CdiModel),
    Cdp(CdpModel),
    Fpm(FpmModel),
}

impl Model {
    pub fn modality(&self) -> Modality {
        match self {
            Model::Cdi(_) => Modality::Cdi,
            Model::Cdp(_) => Modality::Cdp,
            Model::Fpm(_) => Modality::Fpm,
        }
    }

    /// Dimensions of the unknown field (object for CDI/CDP, HR for FPM).
    pub fn object_dims(&self) -> (usize, usize) {
        match self {
            Model::Cdi(m) => m.object_dims(),
            Model::Cdp(m) => m.object_dims(),
            Model::Fpm(m) => m.hr_dims(),
        }
    }

    pub fn plane_dims(&self) -> (usize, usize) {
        match self {
            Model::Cdi(m) => m.padded_dims(),
            Model::Cdp(m) => m.object_dims(),
            Model::Fpm(m) => m.lr_dims(),
        }
    }

    pub fn plane_count(&self) -> usize {
        match self {
            Model::Cdi(_) => 1,
            Model::Cdp(m) => m.mask_count(),
            Model::Fpm(m) => m.led_count(),
        }
    }

    pub fn forward(&self, u: &ComplexField) -> Result<MeasurementSet> {
        crate::error::check_dims(self.object_dims(), u.dims())?;
        let planes = self.apply(u)?.into_iter().map(|z| z.intensity()).collect();
        Ok(MeasurementSet::new(self.modality(), planes))
    }

    /// Check that `meas` has the plane count and dimensions this model produces.
    pub fn validate(&self, meas: &MeasurementSet) -> Result<()> {
        if meas.modality != self.modality() {
            return Err(Error::Argument(format!(
                "measurements are {} but model is {}",
                meas.modality,
                self.modality()
            )));
        }
        if meas.planes.len() != self.plane_count() {
            return Err(Error::Argument(format!(
                "expected {} measurement planes, found {}",
                self.plane_count(),
                meas.planes.len()
            )));
        }
        for p in &meas.planes {
            crate::error::check_dims(self.plane_dims(), p.dims())?;
        }
        Ok(())
    }

    /// Enforce measured magnitudes on `v` and map back to object space.
    pub fn magnitude_project(&self, v: &ComplexField, meas: &MeasurementSet) -> Result<ComplexField> {
        Ok(self.project_with_residual(v, meas)?.0)
    }

    /// Projection together with the data residual `||I - |A v|^2|| / ||I||` of the input.
    pub fn project_with_residual(&self, v: &ComplexField, meas: &MeasurementSet) -> Result<(ComplexField, f64)> {
        self.validate(meas)?;
        crate::error::check_dims(self.object_dims(), v.dims())?;
        let i_norm = meas.norm();
        let (out, sq) = match self {
            Model::Cdi(m) => m.project(v, &meas.planes[0]),
            Model::Cdp(m) => m.project(v, &meas.planes),
            Model::Fpm(m) => {
                let sq = self.residual_sq(v, meas)?;
                (m.project(v, &meas.planes), sq)
            }
        };
        Ok((out, normalized(sq, i_norm)))
    }

    /// `||I - |A u|^2|| / ||I||`.
    pub fn residual(&self, u: &ComplexField, meas: &MeasurementSet) -> Result<f64> {
        self.validate(meas)?;
        Ok(normalized(self.residual_sq(u, meas)?, meas.norm()))
    }

    fn residual_sq(&self, u: &ComplexField, meas: &MeasurementSet) -> Result<f64> {
        Ok(self
            .apply(u)?
            .iter()
            .zip(&meas.planes)
            .map(|(z, i)| z.data().iter().zip(i.data()).map(|(a, b)| (b - a.norm_sqr()).powi(2)).sum::<f64>())
            .sum())
    }

    /// Linear part `A u`, one complex plane per measurement.
    pub fn apply(&self, u: &ComplexField) -> Result<Vec<ComplexField>> {
        crate::error::check_dims(self.object_dims(), u.dims())?;
        Ok(match self {
            Model::Cdi(m) => vec![m.apply(u)],
            Model::Cdp(m) => m.apply(u),
            Model::Fpm(m) => m.apply(u),
        })
    }

    /// Adjoint `A^H z`.
    pub fn adjoint(&self, z: &[ComplexField]) -> Result<ComplexField> {
        if z.len() != self.plane_count() {
            return Err(Error::Argument(format!("adjoint expects {} planes, got {}", self.plane_count(), z.len())));
        }
        for p in z {
            crate::error::check_dims(self.plane_dims(), p.dims())?;
        }
        Ok(match self {
            Model::Cdi(m) => m.adjoint(&z[0]),
            Model::Cdp(m) => m.adjoint(z),
            Model::Fpm(m) => m.adjoint(z),
        })
    }

    /// Largest eigenvalue of `A^H A`.
    pub fn gram_norm(&self) -> f64 {
        match self {
            Model::Cdi(_) => 1.0,
            Model::Cdp(m) => m.mask_count() as f64,
            Model::Fpm(m) => m.gram_norm(),
        }
    }

    /// Deterministic adjoint-style starting point.
    ///
    /// CDI: `ifft2(sqrt(I))` cropped to the support. CDP: mean
    /// of `conj(d_l) ifft2(sqrt(I_l))`. FPM: bilinear upsampling of the
    /// centre-LED amplitude with zero phase. `seed` only matters when the
    /// adjoint estimate is identically zero, in which case a seeded
    /// random-phase unit field is returned instead.
    pub fn default_init(&self, meas: &MeasurementSet, seed: u64) -> Result<ComplexField> {
        self.validate(meas)?;
        let init = match self {
            Model::Cdi(m) => m.init(&meas.planes[0]),
            Model::Cdp(m) => m.init(&meas.planes),
            Model::Fpm(m) => m.init(&meas.planes),
        }?;
        if init.energy() > 0.0 {
            return Ok(init);
        }
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (h, w) = self.object_dims();
        let scale = (meas.total() / (h * w) as f64 / self.gram_norm()).sqrt().max(f64::MIN_POSITIVE);
        ComplexField::from_fn(h, w, |_, _| {
            Complex64::from_polar(scale, 2.0 * std::f64::consts::PI * rng.random::<f64>())
        })
    }

    /// Truncated spectral estimate: leading eigenvector of `A^H diag(w) A`
    /// with `w = I` where `0 <= I <= trim * mean(I)` and 0 elsewhere, found by
    /// `iters` power iterations from a seeded random field and scaled so that
    /// `||A u||^2 = sum I`. `trim = inf` gives the plain spectral method.
    pub fn spectral_init(&self, meas: &MeasurementSet, iters: usize, trim: f64, seed: u64) -> Result<ComplexField> {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        self.validate(meas)?;
        if !(trim > 0.0) {
            return Err(Error::Argument(format!("spectral trim must be > 0, got {trim}")));
        }
        let cap = trim * meas.mean();
        let weight = |i: f64| if i > cap { 0.0 } else { i.max(0.0) };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (h, w) = self.object_dims();
        let mut u = ComplexField::from_fn(h, w, |_, _| {
            Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
        })?;
        for _ in 0..iters {
            let mut z = self.apply(&u)?;
            for (zl, il) in z.iter_mut().zip(&meas.planes) {
                zl.data_mut().iter_mut().zip(il.data()).for_each(|(a, &b)| *a *= weight(b));
            }
            u = self.adjoint(&z)?;
            let n = u.norm();
            if !(n > 0.0) || !n.is_finite() {
                return self.default_init(meas, seed);
            }
            u.scale(Complex64::new(1.0 / n, 0.0));
        }
        let target = (meas.total().max(0.0) / self.gram_norm()).sqrt();
        let n = u.norm();
        if n > 0.0 {
            u.scale(Complex64::new(target / n, 0.0));
        }
        Ok(u)
    }

    pub fn initial(&self, meas: &MeasurementSet, kind: InitKind, seed: u64) -> Result<ComplexField> {
        match kind {
            InitKind::Adjoint => self.default_init(meas, seed),
            InitKind::Spectral { iters, trim } => self.spectral_init(meas, iters, trim, seed),
        }
    }
}

/// Starting-point rule for the solvers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitKind {
    /// [`Model::default_init`].
    #[default]
    Adjoint,
    /// [`Model::spectral_init`].
    Spectral {
        iters: usize,
        #[serde(default = "default_trim")]
        trim: f64,
    },
}

fn default_trim() -> f64 {
    9.0
}

fn normalized(sq: f64, i_norm: f64) -> f64 {
    if i_norm > 0.0 {
        sq.sqrt() / i_norm
    } else {
        sq.sqrt()
    }
}

/// Replace the magnitude of `z` by `target`, keeping its phase (phase 0 where `z = 0`).
#[inline]
pub(crate) fn with_magnitude(z: Complex64, target: f64) -> Complex64 {
    let n = z.norm();
    if n > 0.0 {
        z * (target / n)
    } else {
        Complex64::new(target, 0.0)
    }
}

/// `sqrt(max(I, 0))`.
#[inline]
pub(crate) fn clamped_sqrt(i: f64) -> f64 {
    i.max(0.0).sqrt()
}
