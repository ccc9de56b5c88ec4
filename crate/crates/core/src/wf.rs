//! Wirtinger-flow baseline: gradient descent on `1/4 sum (|A u|^2 - I)^2`.

use std::time::Instant;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ap::{intensity_change, RunReport};
use crate::error::{check_dims, Error, Result};
use crate::field::ComplexField;
use crate::models::{MeasurementSet, Model};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WfParams {
    pub max_iters: usize,
    /// Step cap; the schedule is `min(1 - exp(-k / tau0), mu_max)`.
    pub mu_max: f64,
    pub tau0: f64,
    /// Stop on normalized intensity change below this.
    pub tol: f64,
}

impl Default for WfParams {
    fn default() -> Self {
        Self { max_iters: 2000, mu_max: 0.2, tau0: 330.0, tol: 1e-12 }
    }
}

/// Gradient `A^H[(|A u|^2 - I) * A u]` and the residual of `u`.
pub fn wf_gradient(meas: &MeasurementSet, model: &Model, u: &ComplexField) -> Result<(ComplexField, f64)> {
    let mut z = model.apply(u)?;
    let mut sq = 0.0;
    for (zl, il) in z.iter_mut().zip(&meas.planes) {
        for (a, &b) in zl.data_mut().iter_mut().zip(il.data()) {
            let d = a.norm_sqr() - b;
            sq += d * d;
            *a *= d;
        }
    }
    let i_norm = meas.norm();
    Ok((model.adjoint(&z)?, if i_norm > 0.0 { sq.sqrt() / i_norm } else { sq.sqrt() }))
}

/// Smallest step damping before the run is declared stalled.
const MIN_DAMPING: f64 = 1e-12;

/// Plain Wirtinger flow from `init`, rescaled to the energy implied by the data.
///
/// A step that would raise the data residual is halved (and stays halved)
/// until it does not; the run stops, unconverged, once the damping drops
/// below `MIN_DAMPING`.
pub fn wf_baseline(
    meas: &MeasurementSet,
    model: &Model,
    init: &ComplexField,
    p: &WfParams,
) -> Result<(ComplexField, RunReport)> {
    model.validate(meas)?;
    check_dims(model.object_dims(), init.dims())?;
    if p.max_iters == 0 || !(p.mu_max > 0.0) || !(p.tau0 > 0.0) {
        return Err(Error::Argument("invalid Wirtinger-flow parameters".into()));
    }
    if !init.is_finite() {
        return Err(Error::Argument("initial field contains non-finite values".into()));
    }
    let start = Instant::now();
    let gram = model.gram_norm();
    let n = (init.height() * init.width()) as f64;
    let energy = (meas.total() / gram).max(0.0);
    let mut u = init.clone();
    let e0 = u.energy();
    if e0 > 0.0 {
        u.scale(Complex64::new((energy / e0).sqrt(), 0.0));
    }
    let mean_sq = (energy / n).max(f64::MIN_POSITIVE);
    let mut report = RunReport::default();
    let mut damping = 1.0;
    for k in 0..p.max_iters {
        let (grad, residual_of_u) = wf_gradient(meas, model, &u)?;
        report.gradient_norms.push(grad.norm());
        if k > 0 {
            report.residuals.push(residual_of_u);
        }
        let mu = (1.0 - (-((k + 1) as f64) / p.tau0).exp()).min(p.mu_max);
        let next = loop {
            let step = damping * mu / (gram * mean_sq);
            let mut next = u.clone();
            next.data_mut().iter_mut().zip(grad.data()).for_each(|(a, g)| *a -= g * step);
            if next.is_finite() && model.residual(&next, meas)? <= residual_of_u {
                break Some(next);
            }
            damping *= 0.5;
            if damping < MIN_DAMPING {
                break None;
            }
        };
        let Some(next) = next else {
            report.iterations = k + 1;
            report.intensity_changes.push(0.0);
            break;
        };
        let change = intensity_change(&u, &next);
        u = next;
        report.iterations = k + 1;
        report.intensity_changes.push(change);
        if change < p.tol {
            report.converged = true;
            break;
        }
    }
    report.residuals.push(model.residual(&u, meas)?);
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok((u, report))
}
