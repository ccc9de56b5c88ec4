//! Alternating projection between the measurement-magnitude set and the
//! object-domain constraint set.

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::field::ComplexField;
use crate::metrics::{self, SsimParams};
use crate::models::{MeasurementSet, Modality, Model};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApVariant {
    #[default]
    ErrorReduction,
    /// Hybrid input-output; CDI only.
    Hio,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApParams {
    pub max_iters: usize,
    /// Stop once the normalized mean intensity change drops below this.
    pub tol: f64,
    #[serde(default)]
    pub variant: ApVariant,
    #[serde(default = "default_beta")]
    pub hio_beta: f64,
    /// Keep every iterate in [`RunReport::history`].
    #[serde(default)]
    pub record_history: bool,
}

fn default_beta() -> f64 {
    0.9
}

impl Default for ApParams {
    fn default() -> Self {
        Self { max_iters: 300, tol: 1e-6, variant: ApVariant::ErrorReduction, hio_beta: 0.9, record_history: false }
    }
}

impl ApParams {
    /// Iteration budgets: CDI 1000, CDP 300, FPM 50 sweeps.
    pub fn for_modality(modality: Modality) -> Self {
        let max_iters = match modality {
            Modality::Cdi => 1000,
            Modality::Cdp => 300,
            Modality::Fpm => 50,
        };
        Self { max_iters, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Argument("max_iters must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Argument(format!("tol must be > 0, got {}", self.tol)));
        }
        if !(self.hio_beta > 0.0 && self.hio_beta <= 1.0) {
            return Err(Error::Argument(format!("hio_beta must be in (0, 1], got {}", self.hio_beta)));
        }
        Ok(())
    }
}

/// Per-iteration record of a solver run.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub iterations: usize,
    /// `||I - |A u_k|^2|| / ||I||` of the iterate produced by step `k`.
    pub residuals: Vec<f64>,
    /// Normalized mean intensity change of step `k`.
    pub intensity_changes: Vec<f64>,
    /// Gradient norms (gradient solvers only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gradient_norms: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub psnr: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ssim: Vec<f64>,
    pub wall_seconds: f64,
    pub converged: bool,
    pub ssim_params: SsimParams,
    #[serde(skip)]
    pub history: Vec<ComplexField>,
}

impl RunReport {
    pub fn final_residual(&self) -> Option<f64> {
        self.residuals.last().copied()
    }
}

/// `mean | |next|^2 - |prev|^2 | / mean |prev|^2`.
pub fn intensity_change(prev: &ComplexField, next: &ComplexField) -> f64 {
    let num: f64 = prev.data().iter().zip(next.data()).map(|(a, b)| (b.norm_sqr() - a.norm_sqr()).abs()).sum();
    let den: f64 = prev.data().iter().map(|a| a.norm_sqr()).sum();
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Optional ground truth for per-iteration amplitude PSNR/SSIM traces.
#[derive(Clone, Copy)]
pub struct Monitor<'a> {
    pub truth: &'a ComplexField,
}

impl Monitor<'_> {
    pub fn score(&self, est: &ComplexField) -> (f64, f64) {
        let (aligned, _) = global_phase_align(est, self.truth).unwrap_or((est.clone(), false));
        let t = self.truth.amplitude();
        let e = aligned.amplitude();
        let p = metrics::psnr_auto(&t, &e).unwrap_or(f64::NAN);
        let s = if t.height() >= 11 && t.width() >= 11 {
            metrics::ssim_with(&t, &e, t.max().max(f64::MIN_POSITIVE), &SsimParams::default()).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        (p, s)
    }
}

/// Remove the global phase: `est * exp(-i arg(sum est * conj(ref)))`.
///
/// Returns the aligned field and `false` (with `est` unchanged) when the
/// inner product vanishes.
pub fn global_phase_align(est: &ComplexField, reference: &ComplexField) -> Result<(ComplexField, bool)> {
    check_dims(reference.dims(), est.dims())?;
    let ip = est.inner(reference);
    if ip.norm() == 0.0 || !ip.norm().is_finite() {
        return Ok((est.clone(), false));
    }
    let mut out = est.clone();
    out.scale(Complex64::from_polar(1.0, -ip.arg()));
    Ok((out, true))
}

pub fn ap_solve(
    meas: &MeasurementSet,
    model: &Model,
    init: &ComplexField,
    params: &ApParams,
) -> Result<(ComplexField, RunReport)> {
    ap_solve_monitored(meas, model, init, params, None)
}

pub fn ap_solve_monitored(
    meas: &MeasurementSet,
    model: &Model,
    init: &ComplexField,
    params: &ApParams,
    monitor: Option<Monitor<'_>>,
) -> Result<(ComplexField, RunReport)> {
    params.validate()?;
    model.validate(meas)?;
    check_dims(model.object_dims(), init.dims())?;
    if !init.is_finite() {
        return Err(Error::Argument("initial field contains non-finite values".into()));
    }
    let start = Instant::now();
    let (u, mut report) = match (params.variant, model) {
        (ApVariant::ErrorReduction, _) => error_reduction(meas, model, init, params, monitor)?,
        (ApVariant::Hio, Model::Cdi(_)) => hio(meas, model, init, params, monitor)?,
        (ApVariant::Hio, _) => {
            return Err(Error::Argument("the HIO variant needs a support constraint (CDI only)".into()))
        }
    };
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((u, report))
}

fn record(report: &mut RunReport, u: &ComplexField, params: &ApParams, monitor: Option<Monitor<'_>>) {
    if params.record_history {
        report.history.push(u.clone());
    }
    if let Some(m) = monitor {
        let (p, s) = m.score(u);
        report.psnr.push(p);
        report.ssim.push(s);
    }
}

fn error_reduction(
    meas: &MeasurementSet,
    model: &Model,
    init: &ComplexField,
    params: &ApParams,
    monitor: Option<Monitor<'_>>,
) -> Result<(ComplexField, RunReport)> {
    let mut report = RunReport::default();
    let mut u = init.clone();
    for k in 0..params.max_iters {
        let (next, residual_of_u) = model.project_with_residual(&u, meas)?;
        if k > 0 {
            report.residuals.push(residual_of_u);
        }
        if !next.is_finite() {
            return Err(Error::Divergence { iteration: k + 1, last_finite: Box::new(u) });
        }
        let change = intensity_change(&u, &next);
        u = next;
        report.iterations = k + 1;
        report.intensity_changes.push(change);
        record(&mut report, &u, params, monitor);
        if change < params.tol {
            report.converged = true;
            break;
        }
    }
    report.residuals.push(model.residual(&u, meas)?);
    Ok((u, report))
}

fn hio(
    meas: &MeasurementSet,
    model: &Model,
    init: &ComplexField,
    params: &ApParams,
    monitor: Option<Monitor<'_>>,
) -> Result<(ComplexField, RunReport)> {
    let Model::Cdi(cdi) = model else { unreachable!("dispatched on CDI") };
    let intensity = &meas.planes[0];
    let mut report = RunReport::default();
    let mut g = cdi.pad(init);
    let mut u = init.clone();
    let beta = params.hio_beta;
    for k in 0..params.max_iters {
        let (p, _) = cdi.project_padded(&g, intensity);
        let (ph, pw) = cdi.padded_dims();
        let mut next_g = p.clone();
        for r in 0..ph {
            for c in 0..pw {
                let pv = p.get(r, c);
                if !cdi.admissible(r, c, pv) {
                    next_g.set(r, c, g.get(r, c) - pv * beta);
                }
            }
        }
        let mut next = cdi.crop_padded(&p);
        cdi.constrain(&mut next);
        if !next.is_finite() || !next_g.is_finite() {
            return Err(Error::Divergence { iteration: k + 1, last_finite: Box::new(u) });
        }
        let change = intensity_change(&u, &next);
        g = next_g;
        u = next;
        report.iterations = k + 1;
        report.intensity_changes.push(change);
        report.residuals.push(model.residual(&u, meas)?);
        record(&mut report, &u, params, monitor);
        if change < params.tol {
            report.converged = true;
            break;
        }
    }
    Ok((u, report))
}
