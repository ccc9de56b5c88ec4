//! Isotropic ROF denoising by Chambolle's dual projection.

use crate::field::RealImage;

/// Approximately solves `min_z 0.5 ||z - v||^2 + weight * TV(z)`.
pub fn tv_chambolle(v: &RealImage, weight: f64, iterations: usize, step: f64) -> RealImage {
    if weight <= 0.0 || iterations == 0 {
        return v.clone();
    }
    let (h, w) = v.dims();
    let n = h * w;
    let src = v.data();
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    let mut d = vec![0.0; n];
    let inv = 1.0 / weight;
    for _ in 0..iterations {
        divergence(&px, &py, h, w, &mut d);
        for (di, &s) in d.iter_mut().zip(src) {
            *di -= s * inv;
        }
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                let gx = if c + 1 < w { d[i + 1] - d[i] } else { 0.0 };
                let gy = if r + 1 < h { d[i + w] - d[i] } else { 0.0 };
                let norm = 1.0 + step * (gx * gx + gy * gy).sqrt();
                px[i] = (px[i] + step * gx) / norm;
                py[i] = (py[i] + step * gy) / norm;
            }
        }
    }
    divergence(&px, &py, h, w, &mut d);
    let data = src.iter().zip(&d).map(|(s, dv)| s - weight * dv).collect();
    RealImage::from_vec(h, w, data).expect("same dims")
}

/// Discrete divergence, the negative adjoint of the forward-difference gradient.
fn divergence(px: &[f64], py: &[f64], h: usize, w: usize, out: &mut [f64]) {
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let dx = if w == 1 {
                0.0
            } else if c == 0 {
                px[i]
            } else if c + 1 == w {
                -px[i - 1]
            } else {
                px[i] - px[i - 1]
            };
            let dy = if h == 1 {
                0.0
            } else if r == 0 {
                py[i]
            } else if r + 1 == h {
                -py[i - w]
            } else {
                py[i] - py[i - w]
            };
            out[i] = dx + dy;
        }
    }
}

/// Isotropic total variation with forward differences.
pub fn total_variation(z: &RealImage) -> f64 {
    let (h, w) = z.dims();
    let d = z.data();
    let mut tv = 0.0;
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let gx = if c + 1 < w { d[i + 1] - d[i] } else { 0.0 };
            let gy = if r + 1 < h { d[i + w] - d[i] } else { 0.0 };
            tv += (gx * gx + gy * gy).sqrt();
        }
    }
    tv
}

/// `0.5 ||z - v||^2 + weight * TV(z)`.
pub fn rof_objective(z: &RealImage, v: &RealImage, weight: f64) -> f64 {
    let fid: f64 = z.data().iter().zip(v.data()).map(|(a, b)| (a - b).powi(2)).sum();
    0.5 * fid + weight * total_variation(z)
}
