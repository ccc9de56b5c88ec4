//! Shared fixtures for the criterion benches.

use lpr_core::harness::{noisy_measurements, Phantom};
use lpr_core::models::CdpConfig;
use lpr_core::{ComplexField, MeasurementSet, Model, ModelConfig};

/// A noisy CDP problem: model, measurements, truth and the adjoint start.
pub struct CdpProblem {
    pub model: Model,
    pub meas: MeasurementSet,
    pub truth: ComplexField,
    pub init: ComplexField,
}

pub fn cdp_problem(n: usize, masks: usize, snr_db: f64) -> CdpProblem {
    let model = ModelConfig::Cdp(CdpConfig { masks, mask_seed: 1, ..Default::default() }).build((n, n)).expect("model");
    let truth = Phantom::new(1).field(n, n).expect("phantom");
    let meas = noisy_measurements(&model.forward(&truth).expect("forward"), snr_db, 7).expect("noise");
    let init = model.default_init(&meas, 0).expect("init");
    CdpProblem { model, meas, truth, init }
}
