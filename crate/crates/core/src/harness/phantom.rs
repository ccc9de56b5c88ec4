//! Procedural ground-truth fields.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, RealImage};

/// Piecewise-smooth scene: a shaded background, overlapping ellipses and
/// rectangles with linear gradients, and a few soft blobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Phantom {
    pub seed: u64,
    /// Number of hard-edged shapes.
    #[serde(default = "default_shapes")]
    pub shapes: usize,
    /// Amplitude range `[amp_min, 1]`.
    #[serde(default = "default_amp_min")]
    pub amp_min: f64,
    /// Phase range `[-phase_max, phase_max]` radians; zero gives a real object.
    #[serde(default = "default_phase_max")]
    pub phase_max: f64,
}

fn default_shapes() -> usize {
    12
}

fn default_amp_min() -> f64 {
    0.1
}

fn default_phase_max() -> f64 {
    1.0
}

impl Phantom {
    pub fn new(seed: u64) -> Self {
        Self { seed, shapes: default_shapes(), amp_min: default_amp_min(), phase_max: default_phase_max() }
    }

    /// Scene in `[0, 1]`; `salt` decorrelates the amplitude and phase scenes.
    pub fn scene(&self, h: usize, w: usize, salt: u64) -> Result<RealImage> {
        if h == 0 || w == 0 {
            return Err(Error::Size(format!("phantom dims {h}x{w}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let (gx, gy) = (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
        let base = rng.random_range(0.2..0.4);
        let mut img = RealImage::from_fn(h, w, |r, c| {
            let (y, x) = (r as f64 / h as f64 - 0.5, c as f64 / w as f64 - 0.5);
            base + gx * x + gy * y
        })?;
        for k in 0..self.shapes {
            let (cy, cx) = (rng.random_range(0.1..0.9), rng.random_range(0.1..0.9));
            let (ry, rx) = (rng.random_range(0.05..0.25), rng.random_range(0.05..0.25));
            let angle: f64 = rng.random_range(0.0..PI);
            let level = rng.random_range(0.0..1.0);
            let (sx, sy) = (rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4));
            let ellipse = k % 3 != 2;
            let (ca, sa) = (angle.cos(), angle.sin());
            for r in 0..h {
                let y = r as f64 / h as f64 - cy;
                for c in 0..w {
                    let x = c as f64 / w as f64 - cx;
                    let (u, v) = ((ca * x + sa * y) / rx, (-sa * x + ca * y) / ry);
                    let inside = if ellipse { u * u + v * v <= 1.0 } else { u.abs() <= 1.0 && v.abs() <= 1.0 };
                    if inside {
                        img.set(r, c, level + sx * x + sy * y);
                    }
                }
            }
        }
        for _ in 0..3 {
            let (cy, cx) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
            let s = rng.random_range(0.05..0.15);
            let a = rng.random_range(-0.3..0.3);
            for r in 0..h {
                let y = r as f64 / h as f64 - cy;
                for c in 0..w {
                    let x = c as f64 / w as f64 - cx;
                    let v = img.get(r, c) + a * (-(x * x + y * y) / (2.0 * s * s)).exp();
                    img.set(r, c, v);
                }
            }
        }
        let (lo, hi) = (img.min(), img.max());
        let span = if hi > lo { hi - lo } else { 1.0 };
        Ok(img.map(|v| (v - lo) / span))
    }

    pub fn field(&self, h: usize, w: usize) -> Result<ComplexField> {
        let amp = self.scene(h, w, 1)?;
        let ph = self.scene(h, w, 2)?;
        let a0 = self.amp_min;
        ComplexField::from_fn(h, w, |r, c| {
            Complex64::from_polar(a0 + (1.0 - a0) * amp.get(r, c), self.phase_max * (2.0 * ph.get(r, c) - 1.0))
        })
    }
}

/// I.i.d. random complex field: amplitude uniform in `[0.2, 1.2)`, phase uniform.
pub fn random_field(h: usize, w: usize, seed: u64) -> Result<ComplexField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ComplexField::from_fn(h, w, |_, _| Complex64::from_polar(0.2 + rng.random::<f64>(), rng.random_range(-PI..PI)))
}
