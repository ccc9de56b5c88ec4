//! Unitary 2-D FFT over row-major complex buffers.
//!
//! Both directions are scaled by `1/sqrt(h*w)`, so `ifft2(fft2(x)) = x`
//! and `||fft2(x)|| = ||x||`. Spectra are kept in the natural (unshifted)
//! order: index `k` holds frequency `k` for `k < n/2` and `k - n` above.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::Result;
use crate::field::ComplexField;

/// Precomputed row and column transforms for one `(height, width)`.
pub struct Fft2Plan {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

type PlanCache = Mutex<HashMap<(usize, usize), Arc<Fft2Plan>>>;

static PLANS: OnceLock<PlanCache> = OnceLock::new();

/// Shared plan for the given dimensions, created on first use.
pub fn plan(height: usize, width: usize) -> Arc<Fft2Plan> {
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .entry((height, width))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Fft2Plan {
                height,
                width,
                row_fwd: planner.plan_fft_forward(width),
                row_inv: planner.plan_fft_inverse(width),
                col_fwd: planner.plan_fft_forward(height),
                col_inv: planner.plan_fft_inverse(height),
                scale: 1.0 / ((height * width) as f64).sqrt(),
            })
        })
        .clone()
}

impl Fft2Plan {
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.row_fwd, &self.col_fwd);
    }

    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.row_inv, &self.col_inv);
    }

    fn run(&self, buf: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        let (h, w) = (self.height, self.width);
        assert_eq!(buf.len(), h * w, "buffer does not match plan dimensions");
        let mut scratch =
            vec![Complex64::default(); rows.get_inplace_scratch_len().max(cols.get_inplace_scratch_len())];
        if w > 1 {
            rows.process_with_scratch(buf, &mut scratch[..rows.get_inplace_scratch_len()]);
        }
        if h > 1 {
            let mut t = vec![Complex64::default(); h * w];
            transpose(buf, &mut t, h, w);
            cols.process_with_scratch(&mut t, &mut scratch[..cols.get_inplace_scratch_len()]);
            transpose(&t, buf, w, h);
        }
        let s = self.scale;
        buf.iter_mut().for_each(|z| *z *= s);
    }
}

/// Blocked out-of-place transpose of an `h x w` row-major matrix.
fn transpose(src: &[Complex64], dst: &mut [Complex64], h: usize, w: usize) {
    const B: usize = 32;
    for rb in (0..h).step_by(B) {
        for cb in (0..w).step_by(B) {
            for r in rb..(rb + B).min(h) {
                for c in cb..(cb + B).min(w) {
                    dst[c * h + r] = src[r * w + c];
                }
            }
        }
    }
}

pub fn fft2_inplace(f: &mut ComplexField) {
    let p = plan(f.height(), f.width());
    p.forward(f.data_mut());
}

pub fn ifft2_inplace(f: &mut ComplexField) {
    let p = plan(f.height(), f.width());
    p.inverse(f.data_mut());
}

pub fn fft2(f: &ComplexField) -> Result<ComplexField> {
    let mut out = f.clone();
    fft2_inplace(&mut out);
    Ok(out)
}

pub fn ifft2(f: &ComplexField) -> Result<ComplexField> {
    let mut out = f.clone();
    ifft2_inplace(&mut out);
    Ok(out)
}

/// Signed frequency of index `k` on an axis of length `n`.
#[inline]
pub fn signed_freq(k: usize, n: usize) -> isize {
    if k < n.div_ceil(2) {
        k as isize
    } else {
        k as isize - n as isize
    }
}

/// Index of signed frequency `f` on an axis of length `n`, if representable.
#[inline]
pub fn freq_index(f: isize, n: usize) -> Option<usize> {
    let n_i = n as isize;
    let lo = -(n_i / 2);
    let hi = (n_i - 1) / 2;
    if f < lo || f > hi {
        return None;
    }
    Some(if f >= 0 { f as usize } else { (f + n_i) as usize })
}
