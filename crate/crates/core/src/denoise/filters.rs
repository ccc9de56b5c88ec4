//! Gaussian and median smoothing with mirrored boundaries.

use crate::field::RealImage;

/// Mirror index `i` (possibly outside `0..n`) into range, period `2n`.
#[inline]
fn mirror(i: isize, n: usize) -> usize {
    let p = 2 * n as isize;
    let m = i.rem_euclid(p);
    if m < n as isize {
        m as usize
    } else {
        (p - 1 - m) as usize
    }
}

/// Separable Gaussian blur with standard deviation `sigma` pixels.
pub fn gaussian_blur(v: &RealImage, sigma: f64) -> RealImage {
    if sigma <= 0.0 {
        return v.clone();
    }
    let (h, w) = v.dims();
    let rows = blur_axis(v.data(), h, w, sigma, true);
    let data = blur_axis(&rows, h, w, sigma, false);
    RealImage::from_vec(h, w, data).expect("same dims")
}

/// Kernel folded onto the mirror period, so arbitrarily wide kernels stay O(n).
fn folded_kernel(sigma: f64, n: usize) -> (Vec<f64>, isize) {
    let radius = (4.0 * sigma).ceil() as isize;
    let period = 2 * n as isize;
    if radius < period {
        let k: Vec<f64> = (-radius..=radius).map(|t| (-(t * t) as f64 / (2.0 * sigma * sigma)).exp()).collect();
        let s: f64 = k.iter().sum();
        return (k.into_iter().map(|x| x / s).collect(), radius);
    }
    // Fold taps t in [-radius, radius] onto offsets [-(n-1) .. n] modulo the period.
    let mut fold = vec![0.0; period as usize];
    let mut s = 0.0;
    for t in -radius..=radius {
        let g = (-(t as f64).powi(2) / (2.0 * sigma * sigma)).exp();
        fold[t.rem_euclid(period) as usize] += g;
        s += g;
    }
    let half = n as isize - 1;
    let k: Vec<f64> = (-half..=half + 1).map(|t| fold[t.rem_euclid(period) as usize] / s).collect();
    (k, half)
}

fn blur_axis(src: &[f64], h: usize, w: usize, sigma: f64, along_rows: bool) -> Vec<f64> {
    let n = if along_rows { w } else { h };
    let (k, radius) = folded_kernel(sigma, n);
    let mut out = vec![0.0; h * w];
    let mut line = vec![0.0; n];
    let lines = if along_rows { h } else { w };
    for l in 0..lines {
        for (i, v) in line.iter_mut().enumerate() {
            *v = if along_rows { src[l * w + i] } else { src[i * w + l] };
        }
        for i in 0..n {
            let mut acc = 0.0;
            for (t, kv) in k.iter().enumerate() {
                acc += kv * line[mirror(i as isize + t as isize - radius, n)];
            }
            if along_rows {
                out[l * w + i] = acc;
            } else {
                out[i * w + l] = acc;
            }
        }
    }
    out
}

/// Median over a `(2r+1)^2` window.
pub fn median_filter(v: &RealImage, radius: usize) -> RealImage {
    if radius == 0 {
        return v.clone();
    }
    let (h, w) = v.dims();
    let r = radius as isize;
    let mut win = Vec::with_capacity((2 * radius + 1).pow(2));
    let mut data = Vec::with_capacity(h * w);
    for y in 0..h as isize {
        for x in 0..w as isize {
            win.clear();
            for dy in -r..=r {
                for dx in -r..=r {
                    win.push(v.get(mirror(y + dy, h), mirror(x + dx, w)));
                }
            }
            let mid = win.len() / 2;
            let (_, m, _) = win.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
            data.push(*m);
        }
    }
    RealImage::from_vec(h, w, data).expect("same dims")
}

/// 3x3 box mean with mirrored edges.
pub fn box_blur3(v: &RealImage) -> RealImage {
    let (h, w) = v.dims();
    RealImage::from_fn(h, w, |y, x| {
        let mut acc = 0.0;
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                acc += v.get(mirror(y as isize + dy, h), mirror(x as isize + dx, w));
            }
        }
        acc / 9.0
    })
    .expect("same dims")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirror_indices() {
        assert_eq!(mirror(-1, 4), 0);
        assert_eq!(mirror(-2, 4), 1);
        assert_eq!(mirror(4, 4), 3);
        assert_eq!(mirror(9, 4), 1);
        assert_eq!(mirror(0, 1), 0);
        assert_eq!(mirror(-3, 1), 0);
    }

    #[test]
    fn folded_kernel_sums_to_one() {
        let (k, _) = folded_kernel(1e5, 6);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let (k, _) = folded_kernel(1.5, 64);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn median_removes_salt() {
        let mut v = RealImage::filled(9, 9, 0.2).unwrap();
        v.set(4, 4, 5.0);
        let m = median_filter(&v, 1);
        assert!(m.data().iter().all(|&x| x == 0.2));
    }

    #[test]
    fn box_blur_of_constant() {
        let v = RealImage::filled(5, 6, 0.7).unwrap();
        let b = box_blur3(&v);
        assert!(b.data().iter().all(|&x| (x - 0.7).abs() < 1e-15));
    }
}
