//! Complex-field plug-and-play GAP.
//!
//! Alternates a warm-started alternating-projection burst, which pulls
//! the auxiliary estimate `v` onto the measurement set `I = |A u|^2`, with
//! a denoising step `v = EN(u)`. Stops when the normalized intensity change
//! between successive `v` iterates falls below `tol`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ap::{ap_solve, intensity_change, ApParams, ApVariant, Monitor};
use crate::denoise::{enhance_complex, ChannelPolicy, Enhancer};
use crate::error::{check_dims, Error, Result};
use crate::field::ComplexField;
use crate::models::{InitKind, MeasurementSet, Modality, Model};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LprInit {
    /// The starting point given by `base_init`.
    Adjoint,
    /// `iters` error-reduction steps from the `base_init` estimate.
    ApWarmstart { iters: usize },
    /// Caller supplies `v0` through [`lpr_solve_from`].
    Provided,
}

fn default_outer() -> usize {
    100
}

fn default_inner() -> usize {
    3
}

fn default_tol() -> f64 {
    1e-6
}

fn default_init() -> LprInit {
    LprInit::ApWarmstart { iters: 20 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LprParams {
    #[serde(default = "default_outer")]
    pub outer_max: usize,
    #[serde(default = "default_inner")]
    pub inner_ap_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Enhancer strength per outer iteration; the last value repeats.
    #[serde(default)]
    pub strength_schedule: Vec<f64>,
    #[serde(default)]
    pub channel_policy: ChannelPolicy,
    #[serde(default = "default_init")]
    pub init: LprInit,
    /// Starting point fed to the warm start.
    #[serde(default)]
    pub base_init: InitKind,
    #[serde(default)]
    pub inner_variant: ApVariant,
    #[serde(default)]
    pub init_seed: u64,
    /// Keep every `v` iterate in [`LprTrace::history`].
    #[serde(default)]
    pub record_history: bool,
}

impl LprParams {
    /// Defaults for a modality: 3 inner steps (1 sweep for FPM), 100 outer
    /// iterations, tol 1e-6, 20-step AP warm start.
    pub fn for_modality(modality: Modality, strength_schedule: Vec<f64>) -> Self {
        Self {
            outer_max: default_outer(),
            inner_ap_iters: if modality == Modality::Fpm { 1 } else { default_inner() },
            tol: default_tol(),
            strength_schedule,
            channel_policy: ChannelPolicy::AmpPhase,
            init: default_init(),
            base_init: InitKind::Adjoint,
            inner_variant: ApVariant::ErrorReduction,
            init_seed: 0,
            record_history: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.outer_max == 0 || self.inner_ap_iters == 0 {
            return Err(Error::Argument("outer_max and inner_ap_iters must be >= 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Argument(format!("tol must be > 0, got {}", self.tol)));
        }
        if self.strength_schedule.is_empty() {
            return Err(Error::Argument("strength schedule is empty".into()));
        }
        if self.strength_schedule.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::Argument("strengths must be finite and >= 0".into()));
        }
        if self.strength_schedule.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Argument("strength schedule must be non-increasing".into()));
        }
        Ok(())
    }

    pub fn strength_at(&self, k: usize) -> f64 {
        self.strength_schedule[k.min(self.strength_schedule.len() - 1)]
    }
}

/// `n` strengths decaying geometrically from `start` to `end`.
pub fn geometric_schedule(start: f64, end: f64, n: usize) -> Vec<f64> {
    if n <= 1 || start <= 0.0 || end <= 0.0 {
        return vec![start.max(0.0); n.max(1)];
    }
    let ratio = (end / start).powf(1.0 / (n - 1) as f64);
    (0..n).map(|k| start * ratio.powi(k as i32)).collect()
}

/// Object-domain amplitude noise implied by WGN at `snr_db` on `meas`.
///
/// The intensity noise `sigma_I` maps to Fourier-amplitude noise of about
/// `sigma_I / (2 sqrt(mean I))`; back-projection through `A^H` averages
/// `||A^H A||` independent copies.
pub fn estimate_amplitude_noise(meas: &MeasurementSet, model: &Model, snr_db: f64) -> f64 {
    let ratio = 10f64.powf(snr_db / 10.0);
    let sigma_i = (meas.mean_square() / (1.0 + ratio)).sqrt();
    let mean_i = meas.mean().max(f64::MIN_POSITIVE);
    sigma_i / (2.0 * mean_i.sqrt()) / model.gram_norm().sqrt()
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct LprTrace {
    pub outer_iterations: usize,
    /// Data residual `||I - |A u|^2|| / ||I||` of each projected `u`.
    pub residuals: Vec<f64>,
    /// Normalized mean intensity change between successive `v`.
    pub intensity_changes: Vec<f64>,
    pub strengths: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub psnr: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ssim: Vec<f64>,
    pub converged: bool,
    pub wall_seconds: f64,
    /// Time spent building `v0` (included in `wall_seconds`).
    pub init_seconds: f64,
    #[serde(skip)]
    pub history: Vec<ComplexField>,
}

/// Build `v0` according to `params.init`.
pub fn lpr_initial(meas: &MeasurementSet, model: &Model, params: &LprParams) -> Result<ComplexField> {
    let base = model.initial(meas, params.base_init, params.init_seed)?;
    match params.init {
        LprInit::Adjoint => Ok(base),
        LprInit::ApWarmstart { iters } => {
            if iters == 0 {
                return Ok(base);
            }
            let p = ApParams { max_iters: iters, tol: f64::MIN_POSITIVE, ..ApParams::default() };
            Ok(ap_solve(meas, model, &base, &p)?.0)
        }
        LprInit::Provided => Err(Error::Argument("init = provided requires lpr_solve_from".into())),
    }
}

pub fn lpr_solve(
    meas: &MeasurementSet,
    model: &Model,
    enhancer: &Enhancer,
    params: &LprParams,
) -> Result<(ComplexField, LprTrace)> {
    params.validate()?;
    let start = Instant::now();
    let v0 = lpr_initial(meas, model, params)?;
    let init_seconds = start.elapsed().as_secs_f64();
    let (v, mut trace) = lpr_solve_from(meas, model, enhancer, params, &v0, None)?;
    trace.init_seconds = init_seconds;
    trace.wall_seconds += init_seconds;
    Ok((v, trace))
}

/// Run the outer loop from an explicit `v0`.
pub fn lpr_solve_from(
    meas: &MeasurementSet,
    model: &Model,
    enhancer: &Enhancer,
    params: &LprParams,
    v0: &ComplexField,
    monitor: Option<Monitor<'_>>,
) -> Result<(ComplexField, LprTrace)> {
    params.validate()?;
    enhancer.validate()?;
    model.validate(meas)?;
    check_dims(model.object_dims(), v0.dims())?;
    let start = Instant::now();
    let inner = ApParams {
        max_iters: params.inner_ap_iters,
        tol: params.tol,
        variant: params.inner_variant,
        hio_beta: ApParams::default().hio_beta,
        record_history: false,
    };
    let mut trace = LprTrace::default();
    let mut v = v0.clone();
    for k in 0..params.outer_max {
        let (u, report) = ap_solve(meas, model, &v, &inner).map_err(|e| match e {
            Error::Divergence { last_finite, .. } => Error::Divergence { iteration: k + 1, last_finite },
            other => other,
        })?;
        let strength = params.strength_at(k);
        let next = enhance_complex(&u, &enhancer.with_strength(strength), params.channel_policy)?;
        if !next.is_finite() {
            return Err(Error::Divergence { iteration: k + 1, last_finite: Box::new(v) });
        }
        let change = intensity_change(&v, &next);
        trace.outer_iterations = k + 1;
        trace.residuals.push(report.final_residual().unwrap_or(f64::NAN));
        trace.intensity_changes.push(change);
        trace.strengths.push(strength);
        if let Some(m) = monitor {
            let (p, s) = m.score(&next);
            trace.psnr.push(p);
            trace.ssim.push(s);
        }
        if params.record_history {
            trace.history.push(next.clone());
        }
        v = next;
        if change < params.tol {
            trace.converged = true;
            break;
        }
    }
    trace.wall_seconds = start.elapsed().as_secs_f64();
    Ok((v, trace))
}

/// Constraint-residual summary of an LPR run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualSummary {
    pub min_residual: f64,
    pub final_residual: f64,
    /// First outer iteration (1-based) whose residual is below `threshold`.
    pub iterations_to_threshold: Option<usize>,
    pub threshold: f64,
}

/// Report how the hard measurement constraint is approached across iterations.
pub fn gap_vs_admm_residual(trace: &LprTrace, threshold: f64) -> Result<ResidualSummary> {
    let last = *trace.residuals.last().ok_or_else(|| Error::Argument("empty trace".into()))?;
    Ok(ResidualSummary {
        min_residual: trace.residuals.iter().copied().fold(f64::INFINITY, f64::min),
        final_residual: last,
        iterations_to_threshold: trace.residuals.iter().position(|&r| r < threshold).map(|i| i + 1),
        threshold,
    })
}
