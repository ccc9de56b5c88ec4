//! File formats.
//!
//! LPRF: 16-byte header (`b"LPRF"`, then little-endian `u32` height,
//! width and plane count) followed by `plane count` row-major planes of
//! little-endian `f32`. Complex fields are stored as two planes, real
//! part then imaginary part.
//!
//! PNG: 8- or 16-bit grayscale, mapped to `[0, 1]` on read.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use image::{ImageBuffer, Luma};

use crate::error::{Error, Result};
use crate::field::{ComplexField, RealImage};

pub const LPRF_MAGIC: &[u8; 4] = b"LPRF";
pub const LPRF_HEADER_LEN: usize = 16;

pub fn encode_lprf(planes: &[RealImage]) -> Result<Vec<u8>> {
    let first = planes.first().ok_or_else(|| Error::Argument("no planes to encode".into()))?;
    let (h, w) = first.dims();
    if planes.iter().any(|p| p.dims() != (h, w)) {
        return Err(Error::Argument("all LPRF planes must share dimensions".into()));
    }
    let to_u32 = |v: usize| u32::try_from(v).map_err(|_| Error::Size(format!("{v} does not fit in u32")));
    let mut out = Vec::with_capacity(LPRF_HEADER_LEN + planes.len() * h * w * 4);
    out.extend_from_slice(LPRF_MAGIC);
    out.extend_from_slice(&to_u32(h)?.to_le_bytes());
    out.extend_from_slice(&to_u32(w)?.to_le_bytes());
    out.extend_from_slice(&to_u32(planes.len())?.to_le_bytes());
    for p in planes {
        for &v in p.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_lprf(bytes: &[u8]) -> Result<Vec<RealImage>> {
    if bytes.len() < LPRF_HEADER_LEN || &bytes[..4] != LPRF_MAGIC {
        return Err(Error::Format("missing LPRF header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap()) as usize;
    let (h, w, n) = (word(1), word(2), word(3));
    let plane_len = h.checked_mul(w).ok_or_else(|| Error::Format(format!("LPRF dimensions {h}x{w} overflow")))?;
    let expected = plane_len
        .checked_mul(n)
        .and_then(|v| v.checked_mul(4))
        .and_then(|v| v.checked_add(LPRF_HEADER_LEN))
        .ok_or_else(|| Error::Format("LPRF size overflow".into()))?;
    if bytes.len() != expected {
        return Err(Error::Format(format!("LPRF payload is {} bytes, header implies {expected}", bytes.len())));
    }
    let body = &bytes[LPRF_HEADER_LEN..];
    (0..n)
        .map(|k| {
            let data = body[k * plane_len * 4..(k + 1) * plane_len * 4]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect();
            RealImage::from_vec(h, w, data)
        })
        .collect()
}

pub fn write_lprf(path: impl AsRef<Path>, planes: &[RealImage]) -> Result<()> {
    let bytes = encode_lprf(planes)?;
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(&bytes)?;
    f.flush()?;
    Ok(())
}

pub fn read_lprf(path: impl AsRef<Path>) -> Result<Vec<RealImage>> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    decode_lprf(&bytes)
}

pub fn write_lprf_complex(path: impl AsRef<Path>, f: &ComplexField) -> Result<()> {
    write_lprf(path, &[f.re(), f.im()])
}

pub fn read_lprf_complex(path: impl AsRef<Path>) -> Result<ComplexField> {
    let planes = read_lprf(path)?;
    match planes.as_slice() {
        [re, im] => ComplexField::from_re_im(re, im),
        [re] => Ok(ComplexField::from_real(re)),
        _ => Err(Error::Format(format!("complex LPRF needs 1 or 2 planes, found {}", planes.len()))),
    }
}

/// Read any PNG as grayscale in `[0, 1]`.
pub fn read_png_gray(path: impl AsRef<Path>) -> Result<RealImage> {
    let img = image::open(path)?.into_luma16();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|v| v as f64 / u16::MAX as f64).collect();
    RealImage::from_vec(h as usize, w as usize, data)
}

/// Read an RGB(A) or gray PNG as three `[0, 1]` channels.
pub fn read_png_rgb(path: impl AsRef<Path>) -> Result<[RealImage; 3]> {
    let img = image::open(path)?.into_rgb16();
    let (w, h) = img.dimensions();
    let (h, w) = (h as usize, w as usize);
    let raw = img.into_raw();
    let chan = |k: usize| {
        RealImage::from_vec(h, w, raw.iter().skip(k).step_by(3).map(|&v| v as f64 / u16::MAX as f64).collect())
    };
    Ok([chan(0)?, chan(1)?, chan(2)?])
}

/// Bit depth for grayscale PNG output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PngDepth {
    Eight,
    Sixteen,
}

/// Write `img` mapped linearly from `[lo, hi]` onto the full integer range.
pub fn write_png_gray(path: impl AsRef<Path>, img: &RealImage, lo: f64, hi: f64, depth: PngDepth) -> Result<()> {
    let span = if hi > lo { hi - lo } else { 1.0 };
    let norm = |v: f64| ((v - lo) / span).clamp(0.0, 1.0);
    let (w, h) = (img.width() as u32, img.height() as u32);
    match depth {
        PngDepth::Eight => {
            let raw: Vec<u8> = img.data().iter().map(|&v| (norm(v) * 255.0).round() as u8).collect();
            ImageBuffer::<Luma<u8>, _>::from_raw(w, h, raw).expect("buffer sized from image").save(path)?;
        }
        PngDepth::Sixteen => {
            let raw: Vec<u16> = img.data().iter().map(|&v| (norm(v) * 65535.0).round() as u16).collect();
            ImageBuffer::<Luma<u16>, _>::from_raw(w, h, raw).expect("buffer sized from image").save(path)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_exact() {
        let p = RealImage::from_fn(2, 3, |r, c| (r * 3 + c) as f64).unwrap();
        let bytes = encode_lprf(&[p.clone(), p]).unwrap();
        assert_eq!(&bytes[..4], b"LPRF");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &3u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &2u32.to_le_bytes());
        assert_eq!(bytes.len(), 16 + 2 * 6 * 4);
        assert_eq!(&bytes[16 + 4..16 + 8], &1.0f32.to_le_bytes());
    }

    #[test]
    fn decode_rejects_bad_input() {
        assert!(matches!(decode_lprf(b"NOPE"), Err(Error::Format(_))));
        let p = RealImage::filled(2, 2, 1.0).unwrap();
        let mut bytes = encode_lprf(&[p]).unwrap();
        bytes.pop();
        assert!(matches!(decode_lprf(&bytes), Err(Error::Format(_))));
        assert!(encode_lprf(&[]).is_err());
    }

    #[test]
    fn complex_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = ComplexField::from_fn(3, 4, |r, c| num_complex::Complex64::new(r as f64 * 0.5, -(c as f64))).unwrap();
        let path = dir.path().join("f.lprf");
        write_lprf_complex(&path, &f).unwrap();
        assert_eq!(read_lprf_complex(&path).unwrap(), f);
    }

    #[test]
    fn png_round_trip_16_bit() {
        let dir = tempfile::tempdir().unwrap();
        let img = RealImage::from_fn(5, 7, |r, c| (r * 7 + c) as f64 / 34.0).unwrap();
        let path = dir.path().join("a.png");
        write_png_gray(&path, &img, 0.0, 1.0, PngDepth::Sixteen).unwrap();
        let back = read_png_gray(&path).unwrap();
        assert_eq!(back.dims(), (5, 7));
        for (a, b) in img.data().iter().zip(back.data()) {
            assert!((a - b).abs() < 1e-4);
        }
        let path8 = dir.path().join("b.png");
        write_png_gray(&path8, &img, 0.0, 1.0, PngDepth::Eight).unwrap();
        let back8 = read_png_gray(&path8).unwrap();
        for (a, b) in img.data().iter().zip(back8.data()) {
            assert!((a - b).abs() < 1.0 / 255.0);
        }
    }
}
