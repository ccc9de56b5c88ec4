//! Large-scale phase retrieval.
//!
//! Forward models for coherent diffraction imaging (CDI), coded diffraction
//! patterns (CDP) and Fourier ptychographic microscopy (FPM); a classical
//! alternating-projection solver; the complex-field plug-and-play GAP
//! solver built on top of it; pluggable denoisers; and an experiment
//! harness that scores reconstructions and writes CSV/PNG/JSON artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ap;
pub mod denoise;
pub mod error;
pub mod fft;
pub mod field;
pub mod harness;
pub mod io;
pub mod lpr;
pub mod metrics;
pub mod models;
pub mod noise;
pub mod wf;

pub use ap::{ap_solve, global_phase_align, ApParams, ApVariant, RunReport};
pub use denoise::{enhance, enhance_complex, ChannelPolicy, Enhancer, EnhancerKind};
pub use error::{Error, Result};
pub use fft::{fft2, ifft2};
pub use field::{crop_center, zero_pad, ComplexField, RealImage};
pub use lpr::{gap_vs_admm_residual, lpr_solve, LprInit, LprParams, LprTrace};
pub use metrics::{psnr, ssim};
pub use models::{InitKind, MeasurementSet, Modality, Model, ModelConfig};
pub use noise::{add_wgn, NoiseSpec};
pub use num_complex::Complex64;
pub use wf::{wf_baseline, WfParams};
