use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{clamped_sqrt, with_magnitude};
use crate::error::{Error, Result};
use crate::fft;
use crate::field::{padded_dims, ComplexField, RealImage};

fn default_oversample() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdiConfig {
    /// Per-axis oversampling ratio along rows.
    #[serde(default = "default_oversample")]
    pub oversample_h: f64,
    /// Per-axis oversampling ratio along columns.
    #[serde(default = "default_oversample")]
    pub oversample_w: f64,
    /// Force the object to be real-valued.
    #[serde(default)]
    pub real: bool,
    /// Force the object to be real and nonnegative.
    #[serde(default)]
    pub nonnegative: bool,
}

impl Default for CdiConfig {
    fn default() -> Self {
        Self { oversample_h: 2.0, oversample_w: 2.0, real: false, nonnegative: false }
    }
}

/// Far-field diffraction of a zero-padded object: `I = |F(pad(u))|^2`.
#[derive(Clone, Debug)]
pub struct CdiModel {
    object_dims: (usize, usize),
    padded_dims: (usize, usize),
    offset: (usize, usize),
    support: Vec<bool>,
    real: bool,
    nonnegative: bool,
}

impl CdiModel {
    pub fn new(object_dims: (usize, usize), cfg: &CdiConfig) -> Result<Self> {
        if !(cfg.oversample_h >= 2.0 && cfg.oversample_w >= 2.0) {
            return Err(Error::Argument(format!(
                "CDI needs oversampling >= 2 per axis, got {} x {}",
                cfg.oversample_h, cfg.oversample_w
            )));
        }
        let padded = padded_dims(object_dims, cfg.oversample_h, cfg.oversample_w)?;
        let n = object_dims.0 * object_dims.1;
        Ok(Self {
            object_dims,
            padded_dims: padded,
            offset: ((padded.0 - object_dims.0) / 2, (padded.1 - object_dims.1) / 2),
            support: vec![true; n],
            real: cfg.real,
            nonnegative: cfg.nonnegative,
        })
    }

    /// Restrict the support to `mask` (true = object region), object-sized.
    pub fn with_support(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.object_dims.0 * self.object_dims.1 {
            return Err(Error::DimMismatch { expected: self.object_dims, got: (mask.len(), 1) });
        }
        self.support = mask;
        Ok(self)
    }

    pub fn object_dims(&self) -> (usize, usize) {
        self.object_dims
    }

    pub fn padded_dims(&self) -> (usize, usize) {
        self.padded_dims
    }

    pub fn support(&self) -> &[bool] {
        &self.support
    }

    pub(crate) fn apply(&self, u: &ComplexField) -> ComplexField {
        let mut g = u.pad_to(self.padded_dims.0, self.padded_dims.1).expect("padded dims exceed object dims");
        fft::fft2_inplace(&mut g);
        g
    }

    pub(crate) fn adjoint(&self, z: &ComplexField) -> ComplexField {
        let mut g = z.clone();
        fft::ifft2_inplace(&mut g);
        self.crop(&g)
    }

    fn crop(&self, g: &ComplexField) -> ComplexField {
        g.crop(self.offset.0, self.offset.1, self.object_dims.0, self.object_dims.1)
            .expect("object window inside padded grid")
    }

    /// Object-domain constraint: support, then realness / nonnegativity.
    pub fn constrain(&self, u: &mut ComplexField) {
        for (z, &inside) in u.data_mut().iter_mut().zip(&self.support) {
            *z = if inside { self.constrain_value(*z) } else { Complex64::default() };
        }
    }

    #[inline]
    fn constrain_value(&self, z: Complex64) -> Complex64 {
        if self.nonnegative {
            Complex64::new(z.re.max(0.0), 0.0)
        } else if self.real {
            Complex64::new(z.re, 0.0)
        } else {
            z
        }
    }

    /// Whether padded-grid pixel `(r, c)` with value `z` satisfies the object constraints.
    pub(crate) fn admissible(&self, r: usize, c: usize, z: Complex64) -> bool {
        let (r0, c0) = self.offset;
        let (h, w) = self.object_dims;
        if r < r0 || r >= r0 + h || c < c0 || c >= c0 + w {
            return false;
        }
        if !self.support[(r - r0) * w + (c - c0)] {
            return false;
        }
        !(self.nonnegative && z.re < 0.0)
    }

    /// Fourier-magnitude replacement on the padded grid, no object constraint.
    /// Returns the new padded field and the squared intensity residual of `g`.
    pub(crate) fn project_padded(&self, g: &ComplexField, intensity: &RealImage) -> (ComplexField, f64) {
        let mut s = g.clone();
        fft::fft2_inplace(&mut s);
        let mut sq = 0.0;
        for (z, &i) in s.data_mut().iter_mut().zip(intensity.data()) {
            sq += (i - z.norm_sqr()).powi(2);
            *z = with_magnitude(*z, clamped_sqrt(i));
        }
        fft::ifft2_inplace(&mut s);
        (s, sq)
    }

    pub(crate) fn pad(&self, u: &ComplexField) -> ComplexField {
        u.pad_to(self.padded_dims.0, self.padded_dims.1).expect("padded dims exceed object dims")
    }

    pub(crate) fn crop_padded(&self, g: &ComplexField) -> ComplexField {
        self.crop(g)
    }

    pub(crate) fn project(&self, v: &ComplexField, intensity: &RealImage) -> (ComplexField, f64) {
        let (g, sq) = self.project_padded(&self.pad(v), intensity);
        let mut out = self.crop(&g);
        self.constrain(&mut out);
        (out, sq)
    }

    pub(crate) fn init(&self, intensity: &RealImage) -> Result<ComplexField> {
        let (ph, pw) = self.padded_dims;
        let mut g = ComplexField::from_vec(
            ph,
            pw,
            intensity.data().iter().map(|&i| Complex64::new(clamped_sqrt(i), 0.0)).collect(),
        )?;
        fft::ifft2_inplace(&mut g);
        let mut out = self.crop(&g);
        self.constrain(&mut out);
        Ok(out)
    }
}
