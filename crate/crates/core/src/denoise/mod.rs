//! Pluggable image-enhancing step of the plug-and-play loop.
//!
//! Real-valued denoisers ([`enhance`]) are lifted to complex fields by a
//! [`ChannelPolicy`] ([`enhance_complex`]). Before splitting, the field is
//! rotated by its dominant phase `arg(sum v)` and rotated back afterwards,
//! so the phase channel sits around zero and the step commutes with a
//! global phase factor.

mod bridge;
mod filters;
mod tv;

pub use bridge::ExternalBridge;
pub use filters::{box_blur3, gaussian_blur, median_filter};
pub use tv::{rof_objective, total_variation, tv_chambolle};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, RealImage};

fn default_tv_iterations() -> usize {
    30
}

fn default_tv_step() -> f64 {
    0.248
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnhancerKind {
    Identity,
    /// Gaussian blur; strength is the kernel sigma in pixels.
    Gaussian,
    /// Median filter; window radius is `ceil(strength)`.
    Median,
    /// ROF total-variation denoising; strength is the TV weight.
    Tv {
        #[serde(default = "default_tv_iterations")]
        iterations: usize,
        #[serde(default = "default_tv_step")]
        step: f64,
    },
    External(ExternalBridge),
}

/// Split an image into overlapping tiles for the enhancement step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tiling {
    pub tile_h: usize,
    pub tile_w: usize,
    pub overlap: usize,
}

impl Tiling {
    /// Bytes held by one tile of `f64` samples including its halo.
    pub fn working_set_bytes(&self) -> usize {
        (self.tile_h + 2 * self.overlap) * (self.tile_w + 2 * self.overlap) * std::mem::size_of::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Enhancer {
    #[serde(flatten)]
    pub kind: EnhancerKind,
    #[serde(default)]
    pub strength: f64,
    /// Strength multiplier applied to the phase channel under `amp_phase`.
    #[serde(default = "one")]
    pub phase_gain: f64,
    #[serde(default)]
    pub tiling: Option<Tiling>,
}

impl Enhancer {
    pub fn identity() -> Self {
        Self { kind: EnhancerKind::Identity, strength: 0.0, phase_gain: 1.0, tiling: None }
    }

    pub fn tv(strength: f64) -> Self {
        Self {
            kind: EnhancerKind::Tv { iterations: default_tv_iterations(), step: default_tv_step() },
            strength,
            phase_gain: 1.0,
            tiling: None,
        }
    }

    pub fn gaussian(sigma: f64) -> Self {
        Self { kind: EnhancerKind::Gaussian, strength: sigma, phase_gain: 1.0, tiling: None }
    }

    pub fn median(radius: f64) -> Self {
        Self { kind: EnhancerKind::Median, strength: radius, phase_gain: 1.0, tiling: None }
    }

    pub fn external(bridge: ExternalBridge, sigma: f64) -> Self {
        Self { kind: EnhancerKind::External(bridge), strength: sigma, phase_gain: 1.0, tiling: None }
    }

    pub fn with_strength(&self, strength: f64) -> Self {
        Self { strength, ..self.clone() }
    }

    pub fn with_tiling(mut self, tiling: Option<Tiling>) -> Self {
        self.tiling = tiling;
        self
    }

    pub fn is_noop(&self) -> bool {
        matches!(self.kind, EnhancerKind::Identity)
            || (self.strength == 0.0 && !matches!(self.kind, EnhancerKind::External(_)))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strength >= 0.0) || !self.strength.is_finite() {
            return Err(Error::Argument(format!("enhancer strength must be finite and >= 0, got {}", self.strength)));
        }
        if !(self.phase_gain >= 0.0) {
            return Err(Error::Argument("phase_gain must be >= 0".into()));
        }
        if let Some(t) = self.tiling {
            if t.tile_h == 0 || t.tile_w == 0 {
                return Err(Error::Argument("tile dimensions must be >= 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelPolicy {
    /// Denoise amplitude and wrapped phase independently.
    #[default]
    AmpPhase,
    RealImag,
    /// Denoise amplitude, keep the phase.
    AmplitudeOnly,
}

/// Denoise a real image; dimensions are preserved.
pub fn enhance(v: &RealImage, e: &Enhancer) -> Result<RealImage> {
    e.validate()?;
    if !v.is_finite() {
        return Err(Error::Argument("enhancer input contains non-finite values".into()));
    }
    if e.is_noop() {
        return Ok(v.clone());
    }
    let out = match e.tiling {
        Some(t) if t.tile_h < v.height() || t.tile_w < v.width() => enhance_tiled(v, e, t)?,
        _ => enhance_plain(v, e)?,
    };
    if !out.is_finite() {
        return Err(Error::Bridge("enhancer produced non-finite values".into()));
    }
    Ok(out)
}

fn enhance_plain(v: &RealImage, e: &Enhancer) -> Result<RealImage> {
    Ok(match &e.kind {
        EnhancerKind::Identity => v.clone(),
        EnhancerKind::Gaussian => gaussian_blur(v, e.strength),
        EnhancerKind::Median => median_filter(v, e.strength.ceil() as usize),
        EnhancerKind::Tv { iterations, step } => tv_chambolle(v, e.strength, *iterations, *step),
        EnhancerKind::External(bridge) => bridge.run(v, e.strength)?,
    })
}

/// Tile origins along one axis and the halo-extended span of each.
fn tile_spans(n: usize, tile: usize, overlap: usize) -> Vec<(usize, usize, usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + tile).min(n);
        spans.push((start.saturating_sub(overlap), start, end, (end + overlap).min(n)));
        start = end;
    }
    spans
}

/// Blend weight of position `i` in the extended span `[lo, hi)` with core `[c0, c1)`.
///
/// Neighbouring tiles cross-fade over a band of half the halo width centred
/// on the shared core edge; weights of the two tiles sum to one.
fn ramp(i: usize, (lo, c0, c1, hi): (usize, usize, usize, usize)) -> f64 {
    let fade = |d: f64, halo: usize| {
        if halo == 0 {
            return if d >= 0.0 { 1.0 } else { 0.0 };
        }
        let band = (halo as f64 / 2.0).max(1.0);
        ((d + 0.5 + band / 2.0) / band).clamp(0.0, 1.0)
    };
    let i = i as f64;
    fade(i - c0 as f64, c0 - lo).min(fade(c1 as f64 - 1.0 - i, hi - c1))
}

fn enhance_tiled(v: &RealImage, e: &Enhancer, t: Tiling) -> Result<RealImage> {
    let (h, w) = v.dims();
    let untiled = Enhancer { tiling: None, ..e.clone() };
    let mut acc = vec![0.0; h * w];
    let mut wsum = vec![0.0; h * w];
    for ys in tile_spans(h, t.tile_h, t.overlap) {
        for xs in tile_spans(w, t.tile_w, t.overlap) {
            let patch = v.crop(ys.0, xs.0, ys.3 - ys.0, xs.3 - xs.0)?;
            let out = enhance_plain(&patch, &untiled)?;
            for r in ys.0..ys.3 {
                let wy = ramp(r, ys);
                for c in xs.0..xs.3 {
                    let wt = wy * ramp(c, xs);
                    acc[r * w + c] += wt * out.get(r - ys.0, c - xs.0);
                    wsum[r * w + c] += wt;
                }
            }
        }
    }
    let data = acc.iter().zip(&wsum).map(|(a, s)| a / s).collect();
    RealImage::from_vec(h, w, data)
}

/// Dominant phase `arg(sum v)`, or 0 when the sum vanishes.
fn dominant_phase(v: &ComplexField) -> f64 {
    let s: Complex64 = v.data().iter().sum();
    if s.norm() > 0.0 {
        s.arg()
    } else {
        0.0
    }
}

/// Denoise a complex field channel-wise under `policy`.
pub fn enhance_complex(v: &ComplexField, e: &Enhancer, policy: ChannelPolicy) -> Result<ComplexField> {
    e.validate()?;
    if !v.is_finite() {
        return Err(Error::Argument("enhancer input contains non-finite values".into()));
    }
    if e.is_noop() {
        return Ok(v.clone());
    }
    match policy {
        ChannelPolicy::AmplitudeOnly => {
            let amp = enhance(&v.amplitude(), e)?;
            let data = v
                .data()
                .iter()
                .zip(amp.data())
                .map(|(z, &a)| {
                    let n = z.norm();
                    if n > 0.0 {
                        z * (a.max(0.0) / n)
                    } else {
                        Complex64::new(a.max(0.0), 0.0)
                    }
                })
                .collect();
            ComplexField::from_vec(v.height(), v.width(), data)
        }
        ChannelPolicy::AmpPhase => {
            let phi0 = dominant_phase(v);
            let mut centred = v.clone();
            if phi0 != 0.0 {
                centred.scale(Complex64::from_polar(1.0, -phi0));
            }
            let amp = enhance(&centred.amplitude(), e)?.map(|a| a.max(0.0));
            let phase = enhance(&centred.phase(), &e.with_strength(e.strength * e.phase_gain))?;
            let mut out = ComplexField::from_amp_phase(&amp, &phase)?;
            if phi0 != 0.0 {
                out.scale(Complex64::from_polar(1.0, phi0));
            }
            Ok(out)
        }
        ChannelPolicy::RealImag => {
            let phi0 = dominant_phase(v);
            let mut centred = v.clone();
            if phi0 != 0.0 {
                centred.scale(Complex64::from_polar(1.0, -phi0));
            }
            let re = enhance(&centred.re(), e)?;
            let im = enhance(&centred.im(), e)?;
            let mut out = ComplexField::from_re_im(&re, &im)?;
            if phi0 != 0.0 {
                out.scale(Complex64::from_polar(1.0, phi0));
            }
            Ok(out)
        }
    }
}
