//! Dense 2-D containers for complex fields and real images, plus the
//! centered pad/crop pair used by the oversampled far-field model.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn checked_len(height: usize, width: usize) -> Result<usize> {
    if height == 0 || width == 0 {
        return Err(Error::Size(format!("dimensions must be >= 1, got {height}x{width}")));
    }
    height
        .checked_mul(width)
        .filter(|n| *n <= isize::MAX as usize / 16)
        .ok_or_else(|| Error::Size(format!("{height}x{width} exceeds platform limits")))
}

/// Row-major complex image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexField {
    height: usize,
    width: usize,
    data: Vec<Complex64>,
}

/// Row-major real image (intensities, amplitudes or phase maps).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

macro_rules! grid_common {
    ($ty:ident, $elem:ty) => {
        impl $ty {
            pub fn zeros(height: usize, width: usize) -> Result<Self> {
                let n = checked_len(height, width)?;
                Ok(Self { height, width, data: vec![<$elem>::default(); n] })
            }

            pub fn from_vec(height: usize, width: usize, data: Vec<$elem>) -> Result<Self> {
                let n = checked_len(height, width)?;
                if data.len() != n {
                    return Err(Error::Size(format!(
                        "buffer of length {} does not match {height}x{width}",
                        data.len()
                    )));
                }
                Ok(Self { height, width, data })
            }

            pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> $elem) -> Result<Self> {
                let n = checked_len(height, width)?;
                let mut data = Vec::with_capacity(n);
                for r in 0..height {
                    for c in 0..width {
                        data.push(f(r, c));
                    }
                }
                Ok(Self { height, width, data })
            }

            #[inline]
            pub fn height(&self) -> usize {
                self.height
            }

            #[inline]
            pub fn width(&self) -> usize {
                self.width
            }

            #[inline]
            pub fn dims(&self) -> (usize, usize) {
                (self.height, self.width)
            }

            #[inline]
            pub fn len(&self) -> usize {
                self.data.len()
            }

            #[inline]
            pub fn is_empty(&self) -> bool {
                self.data.is_empty()
            }

            #[inline]
            pub fn data(&self) -> &[$elem] {
                &self.data
            }

            #[inline]
            pub fn data_mut(&mut self) -> &mut [$elem] {
                &mut self.data
            }

            pub fn into_vec(self) -> Vec<$elem> {
                self.data
            }

            #[inline]
            pub fn get(&self, row: usize, col: usize) -> $elem {
                self.data[row * self.width + col]
            }

            #[inline]
            pub fn set(&mut self, row: usize, col: usize, value: $elem) {
                self.data[row * self.width + col] = value;
            }

            pub fn rows(&self) -> std::slice::ChunksExact<'_, $elem> {
                self.data.chunks_exact(self.width)
            }

            /// Zero-fill to `(height, width)` with the input placed at
            /// offset `floor((out - in) / 2)` on each axis.
            pub fn pad_to(&self, height: usize, width: usize) -> Result<Self> {
                if height < self.height || width < self.width {
                    return Err(Error::Argument(format!(
                        "cannot pad {}x{} to smaller {height}x{width}",
                        self.height, self.width
                    )));
                }
                let mut out = Self::zeros(height, width)?;
                let (r0, c0) = ((height - self.height) / 2, (width - self.width) / 2);
                for (r, row) in self.rows().enumerate() {
                    let start = (r + r0) * width + c0;
                    out.data[start..start + self.width].copy_from_slice(row);
                }
                Ok(out)
            }

            /// Inverse of [`Self::pad_to`]: extract the centered window.
            pub fn crop_center(&self, height: usize, width: usize) -> Result<Self> {
                if height > self.height || width > self.width || height == 0 || width == 0 {
                    return Err(Error::Argument(format!(
                        "cannot crop {}x{} to {height}x{width}",
                        self.height, self.width
                    )));
                }
                let (r0, c0) = ((self.height - height) / 2, (self.width - width) / 2);
                self.crop(r0, c0, height, width)
            }

            /// Extract the window starting at `(row0, col0)`.
            pub fn crop(&self, row0: usize, col0: usize, height: usize, width: usize) -> Result<Self> {
                if row0 + height > self.height || col0 + width > self.width {
                    return Err(Error::Argument(format!(
                        "window {height}x{width}@({row0},{col0}) exceeds {}x{}",
                        self.height, self.width
                    )));
                }
                let mut data = Vec::with_capacity(checked_len(height, width)?);
                for r in row0..row0 + height {
                    let start = r * self.width + col0;
                    data.extend_from_slice(&self.data[start..start + width]);
                }
                Ok(Self { height, width, data })
            }
        }
    };
}

grid_common!(ComplexField, Complex64);
grid_common!(RealImage, f64);

/// Output dimensions for a padding factor: `ceil(factor * dim)`.
pub fn padded_dims(dims: (usize, usize), factor_h: f64, factor_w: f64) -> Result<(usize, usize)> {
    if !(factor_h >= 1.0 && factor_w >= 1.0) || !factor_h.is_finite() || !factor_w.is_finite() {
        return Err(Error::Argument(format!("padding factors must be finite and >= 1, got {factor_h} x {factor_w}")));
    }
    // Guard against 2.0 * 7 = 14.000000000000002 rounding up.
    let scale = |d: usize, f: f64| ((d as f64 * f) - 1e-9).ceil().max(d as f64) as usize;
    Ok((scale(dims.0, factor_h), scale(dims.1, factor_w)))
}

/// Centered zero padding by per-axis ratio.
pub fn zero_pad(f: &ComplexField, factor_h: f64, factor_w: f64) -> Result<ComplexField> {
    let (h, w) = padded_dims(f.dims(), factor_h, factor_w)?;
    f.pad_to(h, w)
}

/// Inverse of [`zero_pad`].
pub fn crop_center(f: &ComplexField, dims: (usize, usize)) -> Result<ComplexField> {
    f.crop_center(dims.0, dims.1)
}

impl ComplexField {
    pub fn from_real(img: &RealImage) -> Self {
        Self { height: img.height, width: img.width, data: img.data.iter().map(|&v| Complex64::new(v, 0.0)).collect() }
    }

    /// Build `amplitude * exp(i * phase)`.
    pub fn from_amp_phase(amplitude: &RealImage, phase: &RealImage) -> Result<Self> {
        crate::error::check_dims(amplitude.dims(), phase.dims())?;
        let data = amplitude.data.iter().zip(&phase.data).map(|(&a, &p)| Complex64::from_polar(a, p)).collect();
        Ok(Self { height: amplitude.height, width: amplitude.width, data })
    }

    pub fn from_re_im(re: &RealImage, im: &RealImage) -> Result<Self> {
        crate::error::check_dims(re.dims(), im.dims())?;
        let data = re.data.iter().zip(&im.data).map(|(&a, &b)| Complex64::new(a, b)).collect();
        Ok(Self { height: re.height, width: re.width, data })
    }

    fn map_real(&self, f: impl Fn(&Complex64) -> f64) -> RealImage {
        RealImage { height: self.height, width: self.width, data: self.data.iter().map(f).collect() }
    }

    pub fn amplitude(&self) -> RealImage {
        self.map_real(|z| z.norm())
    }

    /// Wrapped phase in (-pi, pi].
    pub fn phase(&self) -> RealImage {
        self.map_real(|z| z.arg())
    }

    pub fn intensity(&self) -> RealImage {
        self.map_real(|z| z.norm_sqr())
    }

    pub fn re(&self) -> RealImage {
        self.map_real(|z| z.re)
    }

    pub fn im(&self) -> RealImage {
        self.map_real(|z| z.im)
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.energy().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&mut self, s: Complex64) {
        self.data.iter_mut().for_each(|z| *z *= s);
    }

    /// Euclidean distance `||self - other||`.
    pub fn distance(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dims(), other.dims());
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }

    /// Inner product `sum(self * conj(other))`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b.conj()).sum()
    }
}

impl RealImage {
    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        let n = checked_len(height, width)?;
        Ok(Self { height, width, data: vec![value; n] })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn mean_square(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>() / self.data.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self { height: self.height, width: self.width, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> ComplexField {
        ComplexField::from_fn(h, w, |r, c| Complex64::new(r as f64, c as f64 + 0.5)).unwrap()
    }

    #[test]
    fn zero_dims_rejected() {
        assert!(matches!(ComplexField::zeros(0, 4), Err(Error::Size(_))));
        assert!(matches!(RealImage::zeros(3, 0), Err(Error::Size(_))));
    }

    #[test]
    fn overflow_rejected() {
        assert!(matches!(ComplexField::zeros(usize::MAX, 2), Err(Error::Size(_))));
    }

    #[test]
    fn pad_factor_two_on_full_scale_frame() {
        assert_eq!(padded_dims((1356, 2040), 2.0, 2.0).unwrap(), (2712, 4080));
        assert_eq!(padded_dims((7, 5), 1.5, 2.0).unwrap(), (11, 10));
    }

    #[test]
    fn pad_factor_one_is_identity() {
        let f = ramp(5, 7);
        assert_eq!(zero_pad(&f, 1.0, 1.0).unwrap(), f);
    }

    #[test]
    fn pad_rejects_shrinking() {
        let f = ramp(4, 4);
        assert!(matches!(zero_pad(&f, 0.5, 1.0), Err(Error::Argument(_))));
        assert!(zero_pad(&f, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn pad_then_crop_is_identity_and_border_zero() {
        for &(h, w) in &[(4, 4), (5, 3), (1, 1), (6, 9)] {
            let f = ramp(h, w);
            let p = zero_pad(&f, 2.0, 2.0).unwrap();
            assert_eq!(p.dims(), (2 * h, 2 * w));
            let (r0, c0) = ((2 * h - h) / 2, (2 * w - w) / 2);
            let mut border = 0.0;
            for r in 0..p.height() {
                for c in 0..p.width() {
                    let inside = r >= r0 && r < r0 + h && c >= c0 && c < c0 + w;
                    if !inside {
                        border += p.get(r, c).norm();
                    }
                }
            }
            assert_eq!(border, 0.0);
            assert_eq!(crop_center(&p, (h, w)).unwrap(), f);
        }
    }

    #[test]
    fn amp_phase_round_trip() {
        let a = RealImage::from_fn(3, 3, |r, c| 1.0 + (r + c) as f64).unwrap();
        let p = RealImage::from_fn(3, 3, |r, c| 0.1 * (r as f64 - c as f64)).unwrap();
        let f = ComplexField::from_amp_phase(&a, &p).unwrap();
        for (x, y) in f.amplitude().data().iter().zip(a.data()) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in f.phase().data().iter().zip(p.data()) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
