use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{clamped_sqrt, with_magnitude};
use crate::error::{Error, Result};
use crate::fft::{self, freq_index, signed_freq};
use crate::field::{ComplexField, RealImage};

/// Optical geometry of a Fourier ptychographic microscope.
///
/// Lengths are in metres. `pixel_size` is the camera pixel; the
/// object-plane low-resolution pixel is `pixel_size / magnification`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FpmConfig {
    pub wavelength: f64,
    pub na: f64,
    pub led_pitch: f64,
    pub led_height: f64,
    /// LEDs per side of the square array.
    pub grid: usize,
    pub pixel_size: f64,
    #[serde(default = "one")]
    pub magnification: f64,
    /// HR / LR ratio per axis.
    pub downsample: usize,
    /// Relaxation of the sequential spectrum update; 1 is the classic full replacement.
    #[serde(default = "one")]
    pub step: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for FpmConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl FpmConfig {
    /// 625 nm, NA 0.08, 4 mm pitch at 84.8 mm, 3.4 um pixels, 7x7 LEDs, HR = 4 x LR.
    pub fn desk() -> Self {
        Self {
            wavelength: 625e-9,
            na: 0.08,
            led_pitch: 4e-3,
            led_height: 84.8e-3,
            grid: 7,
            pixel_size: 3.4e-6,
            magnification: 1.0,
            downsample: 4,
            step: 1.0,
        }
    }

    /// Same optics with a 15x15 array. The outer LEDs only stay inside the
    /// HR spectrum of a 2048^2 grid with a 2x objective.
    pub fn full_scale() -> Self {
        Self { grid: 15, magnification: 2.0, ..Self::desk() }
    }

    /// Object-plane LR pixel pitch.
    pub fn lr_pixel(&self) -> f64 {
        self.pixel_size / self.magnification
    }

    /// Pupil cutoff radius in spectral pixels `(rows, cols)` for an LR grid.
    pub fn pupil_radius_px(&self, lr_dims: (usize, usize)) -> (f64, f64) {
        let cutoff = self.na / self.wavelength;
        let dx = self.lr_pixel();
        (cutoff * lr_dims.0 as f64 * dx, cutoff * lr_dims.1 as f64 * dx)
    }

    /// Illumination spatial frequency `sin(atan(x / height)) / lambda` of an LED at lateral offset `x`.
    pub fn wavevector(&self, x: f64) -> f64 {
        (x / self.led_height).atan().sin() / self.wavelength
    }
}

#[derive(Clone, Debug)]
struct Led {
    /// (kx, ky) in 1/m.
    wavevector: (f64, f64),
    /// (rows, cols) spectral-pixel shift.
    offset: (isize, isize),
    /// HR spectrum index for every entry of the pupil support.
    hr_index: Vec<usize>,
}

/// Fourier ptychography: `I_j = |F^-1[P * F{u * S_j}]|^2` on the LR grid.
#[derive(Clone, Debug)]
pub struct FpmModel {
    config: Option<FpmConfig>,
    hr_dims: (usize, usize),
    lr_dims: (usize, usize),
    pupil: ComplexField,
    support: Vec<usize>,
    pupil_max_sq: f64,
    leds: Vec<Led>,
    order: Vec<usize>,
    scale: f64,
    step: f64,
}

impl FpmModel {
    pub fn new(hr_dims: (usize, usize), cfg: &FpmConfig) -> Result<Self> {
        if cfg.downsample == 0 || !hr_dims.0.is_multiple_of(cfg.downsample) || !hr_dims.1.is_multiple_of(cfg.downsample)
        {
            return Err(Error::Argument(format!(
                "HR dims {hr_dims:?} are not a multiple of downsample {}",
                cfg.downsample
            )));
        }
        if cfg.grid == 0 {
            return Err(Error::Argument("LED grid must be at least 1x1".into()));
        }
        let positive = [cfg.wavelength, cfg.na, cfg.led_pitch, cfg.led_height, cfg.pixel_size, cfg.magnification];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Argument("FPM optical parameters must be positive and finite".into()));
        }
        if !(cfg.step > 0.0 && cfg.step <= 1.0) {
            return Err(Error::Argument(format!("FPM update step must be in (0, 1], got {}", cfg.step)));
        }
        let lr_dims = (hr_dims.0 / cfg.downsample, hr_dims.1 / cfg.downsample);
        let (ry, rx) = cfg.pupil_radius_px(lr_dims);
        let pupil = ComplexField::from_fn(lr_dims.0, lr_dims.1, |r, c| {
            let fy = signed_freq(r, lr_dims.0) as f64;
            let fx = signed_freq(c, lr_dims.1) as f64;
            if (fy / ry).powi(2) + (fx / rx).powi(2) <= 1.0 {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::default()
            }
        })?;
        let dx = cfg.lr_pixel();
        let (dky, dkx) = (1.0 / (lr_dims.0 as f64 * dx), 1.0 / (lr_dims.1 as f64 * dx));
        let centre = (cfg.grid as f64 - 1.0) / 2.0;
        let mut offsets = Vec::with_capacity(cfg.grid * cfg.grid);
        let mut wavevectors = Vec::with_capacity(cfg.grid * cfg.grid);
        for i in 0..cfg.grid {
            for j in 0..cfg.grid {
                let y = (i as f64 - centre) * cfg.led_pitch;
                let x = (j as f64 - centre) * cfg.led_pitch;
                let (ky, kx) = (cfg.wavevector(y), cfg.wavevector(x));
                wavevectors.push((kx, ky));
                offsets.push(((ky / dky).round() as isize, (kx / dkx).round() as isize));
            }
        }
        let mut m = Self::from_parts(hr_dims, pupil, &offsets)?;
        for (led, wv) in m.leds.iter_mut().zip(wavevectors) {
            led.wavevector = wv;
        }
        m.config = Some(cfg.clone());
        m.step = cfg.step;
        Ok(m)
    }

    /// Build from an explicit LR pupil (natural FFT order) and per-LED
    /// spectral offsets in pixels.
    pub fn from_parts(hr_dims: (usize, usize), pupil: ComplexField, offsets: &[(isize, isize)]) -> Result<Self> {
        let lr_dims = pupil.dims();
        if lr_dims.0 > hr_dims.0 || lr_dims.1 > hr_dims.1 {
            return Err(Error::Argument(format!("LR grid {lr_dims:?} larger than HR grid {hr_dims:?}")));
        }
        if offsets.is_empty() {
            return Err(Error::Argument("FPM needs at least one LED".into()));
        }
        let support: Vec<usize> = (0..pupil.len()).filter(|&k| pupil.data()[k].norm_sqr() > 0.0).collect();
        let pupil_max_sq = pupil.data().iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        let mut leds = Vec::with_capacity(offsets.len());
        for (j, &(oy, ox)) in offsets.iter().enumerate() {
            let hr_index = support
                .iter()
                .map(|&k| {
                    let fy = signed_freq(k / lr_dims.1, lr_dims.0) - oy;
                    let fx = signed_freq(k % lr_dims.1, lr_dims.1) - ox;
                    match (freq_index(fy, hr_dims.0), freq_index(fx, hr_dims.1)) {
                        (Some(r), Some(c)) => Ok(r * hr_dims.1 + c),
                        _ => Err(Error::Geometry(format!(
                            "LED {j} with offset ({oy}, {ox}) pushes the pupil outside the {}x{} spectrum",
                            hr_dims.0, hr_dims.1
                        ))),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            leds.push(Led { wavevector: (0.0, 0.0), offset: (oy, ox), hr_index });
        }
        let mut order: Vec<usize> = (0..leds.len()).collect();
        order.sort_by(|&a, &b| {
            let key = |j: usize| {
                let (oy, ox) = leds[j].offset;
                ((oy * oy + ox * ox) as f64, (oy as f64).atan2(ox as f64))
            };
            let (da, aa) = key(a);
            let (db, ab) = key(b);
            da.total_cmp(&db).then(aa.total_cmp(&ab)).then(a.cmp(&b))
        });
        let scale = ((lr_dims.0 * lr_dims.1) as f64 / (hr_dims.0 * hr_dims.1) as f64).sqrt();
        Ok(Self { config: None, hr_dims, lr_dims, pupil, support, pupil_max_sq, leds, order, scale, step: 1.0 })
    }

    pub fn config(&self) -> Option<&FpmConfig> {
        self.config.as_ref()
    }

    pub fn hr_dims(&self) -> (usize, usize) {
        self.hr_dims
    }

    pub fn lr_dims(&self) -> (usize, usize) {
        self.lr_dims
    }

    pub fn led_count(&self) -> usize {
        self.leds.len()
    }

    pub fn pupil(&self) -> &ComplexField {
        &self.pupil
    }

    /// Spectral pixel offsets `(rows, cols)` per LED in grid order.
    pub fn offsets(&self) -> Vec<(isize, isize)> {
        self.leds.iter().map(|l| l.offset).collect()
    }

    pub fn wavevectors(&self) -> Vec<(f64, f64)> {
        self.leds.iter().map(|l| l.wavevector).collect()
    }

    /// Sequential update order: centre LED first, spiralling outward.
    pub fn update_order(&self) -> &[usize] {
        &self.order
    }

    /// Distinct HR spectral pixels covered by the first `n` LEDs of the update order.
    pub fn coverage(&self, n: usize) -> usize {
        let mut seen = vec![false; self.hr_dims.0 * self.hr_dims.1];
        let mut count = 0;
        for &j in self.order.iter().take(n) {
            for &idx in &self.leds[j].hr_index {
                if !seen[idx] {
                    seen[idx] = true;
                    count += 1;
                }
            }
        }
        count
    }

    pub(crate) fn gram_norm(&self) -> f64 {
        let mut acc = vec![0.0; self.hr_dims.0 * self.hr_dims.1];
        for led in &self.leds {
            for (&k, &idx) in self.support.iter().zip(&led.hr_index) {
                acc[idx] += self.pupil.data()[k].norm_sqr() * self.scale * self.scale;
            }
        }
        acc.into_iter().fold(0.0, f64::max)
    }

    fn lr_spectrum(&self, spectrum: &ComplexField, led: &Led) -> ComplexField {
        let mut lr = ComplexField::zeros(self.lr_dims.0, self.lr_dims.1).expect("valid LR dims");
        let p = self.pupil.data();
        let out = lr.data_mut();
        for (&k, &idx) in self.support.iter().zip(&led.hr_index) {
            out[k] = p[k] * spectrum.data()[idx] * self.scale;
        }
        lr
    }

    pub(crate) fn apply(&self, u: &ComplexField) -> Vec<ComplexField> {
        let spectrum = fft::fft2(u).expect("fft");
        self.leds
            .iter()
            .map(|led| {
                let mut lr = self.lr_spectrum(&spectrum, led);
                fft::ifft2_inplace(&mut lr);
                lr
            })
            .collect()
    }

    pub(crate) fn adjoint(&self, z: &[ComplexField]) -> ComplexField {
        let mut spectrum = ComplexField::zeros(self.hr_dims.0, self.hr_dims.1).expect("valid HR dims");
        let p = self.pupil.data();
        for (led, zj) in self.leds.iter().zip(z) {
            let zs = fft::fft2(zj).expect("fft");
            let acc = spectrum.data_mut();
            for (&k, &idx) in self.support.iter().zip(&led.hr_index) {
                acc[idx] += p[k].conj() * zs.data()[k] * self.scale;
            }
        }
        fft::ifft2_inplace(&mut spectrum);
        spectrum
    }

    /// One sequential sweep over all LEDs in spiral order, stitching the
    /// magnitude-corrected sub-spectra back into the HR spectrum.
    pub(crate) fn project(&self, v: &ComplexField, planes: &[RealImage]) -> ComplexField {
        let mut spectrum = fft::fft2(v).expect("fft");
        let p = self.pupil.data();
        let inv_max = if self.pupil_max_sq > 0.0 { 1.0 / self.pupil_max_sq } else { 0.0 };
        for &j in &self.order {
            let led = &self.leds[j];
            let before = self.lr_spectrum(&spectrum, led);
            let mut field = before.clone();
            fft::ifft2_inplace(&mut field);
            for (z, &i) in field.data_mut().iter_mut().zip(planes[j].data()) {
                *z = with_magnitude(*z, clamped_sqrt(i));
            }
            fft::fft2_inplace(&mut field);
            let hr = spectrum.data_mut();
            for (&k, &idx) in self.support.iter().zip(&led.hr_index) {
                let delta = field.data()[k] - before.data()[k];
                hr[idx] += p[k].conj() * delta * (self.step * inv_max / self.scale);
            }
        }
        fft::ifft2_inplace(&mut spectrum);
        spectrum
    }

    /// Index of the LED with the smallest illumination offset.
    pub fn centre_led(&self) -> usize {
        self.order[0]
    }

    pub(crate) fn init(&self, planes: &[RealImage]) -> Result<ComplexField> {
        let amp = planes[self.centre_led()].map(clamped_sqrt);
        let up = bilinear_upsample(&amp, self.hr_dims)?;
        Ok(ComplexField::from_real(&up))
    }
}

/// Bilinear resampling onto a finer grid with pixel-centre alignment.
pub(crate) fn bilinear_upsample(img: &RealImage, dims: (usize, usize)) -> Result<RealImage> {
    let (h, w) = img.dims();
    let sy = h as f64 / dims.0 as f64;
    let sx = w as f64 / dims.1 as f64;
    RealImage::from_fn(dims.0, dims.1, |r, c| {
        let y = ((r as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        let x = ((c as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
        let (y0, x0) = (y.floor() as usize, x.floor() as usize);
        let (y1, x1) = ((y0 + 1).min(h - 1), (x0 + 1).min(w - 1));
        let (ty, tx) = (y - y0 as f64, x - x0 as f64);
        let top = img.get(y0, x0) * (1.0 - tx) + img.get(y0, x1) * tx;
        let bot = img.get(y1, x0) * (1.0 - tx) + img.get(y1, x1) * tx;
        top * (1.0 - ty) + bot * ty
    })
}
