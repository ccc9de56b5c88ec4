//! Declarative benchmark grid: one row per (algorithm, SNR) cell.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::phantom::{random_field, Phantom};
use super::report::{lpr_trace_csv, run_report_csv, write_rows_csv, BenchRow};
use super::score::{score, Score, ScoreOptions};
use crate::ap::{ap_solve, ApParams};
use crate::denoise::Enhancer;
use crate::error::{Error, Result};
use crate::field::{ComplexField, RealImage};
use crate::io::{self, PngDepth};
use crate::lpr::{
    estimate_amplitude_noise, geometric_schedule, lpr_initial, lpr_solve, lpr_solve_from, LprInit, LprParams,
};
use crate::models::{InitKind, MeasurementSet, Modality, Model, ModelConfig};
use crate::noise::{add_wgn, NoiseSpec};
use crate::wf::{wf_baseline, WfParams};

fn default_name() -> String {
    "experiment".into()
}

fn yes() -> bool {
    true
}

/// Where the unknown field comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundTruth {
    Phantom(Phantom),
    /// I.i.d. random amplitude and phase.
    Random {
        seed: u64,
    },
    /// Amplitude (and optionally phase) from grayscale PNGs scaled to `dims`' source size.
    Image {
        amplitude: PathBuf,
        #[serde(default)]
        phase: Option<PathBuf>,
        /// Amplitude range `[amp_min, 1]`.
        #[serde(default)]
        amp_min: f64,
        /// Phase PNG `[0, 1]` maps to `[-phase_max, phase_max]`.
        #[serde(default = "default_phase_max")]
        phase_max: f64,
    },
}

fn default_phase_max() -> f64 {
    1.0
}

impl Default for GroundTruth {
    fn default() -> Self {
        GroundTruth::Phantom(Phantom::new(0))
    }
}

impl GroundTruth {
    pub fn load(&self, dims: (usize, usize)) -> Result<ComplexField> {
        match self {
            GroundTruth::Phantom(p) => p.field(dims.0, dims.1),
            GroundTruth::Random { seed } => random_field(dims.0, dims.1, *seed),
            GroundTruth::Image { amplitude, phase, amp_min, phase_max } => {
                let amp = io::read_png_gray(amplitude)?;
                if amp.dims() != dims {
                    return Err(Error::Config(format!(
                        "{} is {:?}, config dims are {dims:?}",
                        amplitude.display(),
                        amp.dims()
                    )));
                }
                let amp = amp.map(|a| amp_min + (1.0 - amp_min) * a);
                let ph = match phase {
                    Some(p) => {
                        let ph = io::read_png_gray(p)?;
                        crate::error::check_dims(dims, ph.dims())?;
                        ph.map(|v| phase_max * (2.0 * v - 1.0))
                    }
                    None => RealImage::zeros(dims.0, dims.1)?,
                };
                ComplexField::from_amp_phase(&amp, &ph)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Measurement SNRs in dB; each becomes one row per algorithm.
    #[serde(default)]
    pub snr_db: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Also run a noise-free cell (reported with `snr_db = inf`).
    #[serde(default)]
    pub noiseless: bool,
}

/// Starting point for AP and WF.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StartPoint {
    #[default]
    Adjoint,
    Spectral {
        iters: usize,
        #[serde(default = "default_trim")]
        trim: f64,
    },
    /// The ground truth itself (sanity runs).
    Truth,
}

fn default_trim() -> f64 {
    9.0
}

impl StartPoint {
    fn build(&self, meas: &MeasurementSet, model: &Model, truth: Option<&ComplexField>) -> Result<ComplexField> {
        match *self {
            StartPoint::Adjoint => model.default_init(meas, 0),
            StartPoint::Spectral { iters, trim } => model.initial(meas, InitKind::Spectral { iters, trim }, 0),
            StartPoint::Truth => {
                truth.cloned().ok_or_else(|| Error::Config("the truth start needs a ground truth".into()))
            }
        }
    }

    fn default_wf() -> Self {
        StartPoint::Spectral { iters: 50, trim: default_trim() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum SolverSpec {
    Ap {
        /// Defaults to the modality budget.
        #[serde(default)]
        params: Option<ApParams>,
        #[serde(default)]
        start: StartPoint,
    },
    Lpr {
        /// Defaults to the modality defaults.
        #[serde(default)]
        params: Option<LprParams>,
        /// Fills `params.strength_schedule`; when both are absent the
        /// schedule decays from the estimated noise level to a tenth of it.
        #[serde(default)]
        schedule: Option<Schedule>,
        #[serde(default = "default_enhancer")]
        enhancer: Enhancer,
        /// Reuse one AP warm start per SNR across LPR entries and report only
        /// the time spent beyond it.
        #[serde(default = "yes")]
        shared_warmstart: bool,
    },
    Wf {
        #[serde(default)]
        params: Option<WfParams>,
        #[serde(default = "StartPoint::default_wf")]
        start: StartPoint,
    },
}

/// Strength schedule recipe resolved per SNR cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// Geometric decay over `steps` outer iterations (the outer budget when unset).
    Geometric {
        start: f64,
        end: f64,
        #[serde(default)]
        steps: Option<usize>,
    },
    Constant {
        value: f64,
    },
    /// Geometric decay from the estimated amplitude noise to `ratio` times it.
    NoiseEstimate {
        #[serde(default = "default_ratio")]
        ratio: f64,
    },
}

fn default_ratio() -> f64 {
    0.1
}

impl Schedule {
    pub fn resolve(&self, outer_max: usize, meas: &MeasurementSet, model: &Model, snr_db: f64) -> Vec<f64> {
        match *self {
            Schedule::Geometric { start, end, steps } => geometric_schedule(start, end, steps.unwrap_or(outer_max)),
            Schedule::Constant { value } => vec![value],
            Schedule::NoiseEstimate { ratio } => {
                let sigma = if snr_db.is_finite() { estimate_amplitude_noise(meas, model, snr_db) } else { 0.0 };
                geometric_schedule(sigma, sigma * ratio, outer_max)
            }
        }
    }
}

fn default_enhancer() -> Enhancer {
    Enhancer::tv(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    /// Row label; must be unique within the experiment.
    pub name: String,
    #[serde(flatten)]
    pub spec: SolverSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Write amplitude/phase PNGs and LPRF fields per cell.
    #[serde(default = "yes")]
    pub images: bool,
    /// Record wall time; when off the CSV column is left empty so reruns are byte-identical.
    #[serde(default = "yes")]
    pub timing: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: None, images: true, timing: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub model: ModelConfig,
    /// Object (CDI, CDP) or high-resolution (FPM) grid, `[height, width]`.
    pub dims: (usize, usize),
    #[serde(default)]
    pub ground_truth: GroundTruth,
    pub noise: NoiseConfig,
    pub algorithms: Vec<AlgorithmConfig>,
    /// Defaults to the ambiguity search for CDI and plain phase alignment otherwise.
    #[serde(default)]
    pub score: Option<ScoreOptions>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Worker pool width; all cores when unset.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read a TOML config, or the `config` entry of a JSON run manifest.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let manifest: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            let cfg: Self = serde_json::from_value(manifest.get("config").cloned().unwrap_or(manifest))
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            cfg.validate()?;
            return Ok(cfg);
        }
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::Config("at least one algorithm is required".into()));
        }
        let mut names: Vec<&str> = self.algorithms.iter().map(|a| a.name.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Config(format!("duplicate algorithm name {:?}", w[0])));
        }
        if names.iter().any(|n| n.is_empty() || n.contains([',', '"', '\n', '/', '\\'])) {
            return Err(Error::Config("algorithm names must be non-empty without , \" / \\ or newlines".into()));
        }
        if self.noise.snr_db.is_empty() && !self.noise.noiseless {
            return Err(Error::Config("no SNR cells: give noise.snr_db or set noise.noiseless".into()));
        }
        if let Some(s) = self.noise.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::Config(format!("SNR entries must be finite, got {s}")));
        }
        if self.dims.0 == 0 || self.dims.1 == 0 {
            return Err(Error::Config(format!("dims must be positive, got {:?}", self.dims)));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        for a in &self.algorithms {
            match &a.spec {
                SolverSpec::Ap { params: Some(p), .. } => p.validate(),
                SolverSpec::Lpr { params, enhancer, .. } => {
                    enhancer.validate()?;
                    params.as_ref().map_or(Ok(()), |p| {
                        let mut p = p.clone();
                        if p.strength_schedule.is_empty() {
                            p.strength_schedule = vec![0.0];
                        }
                        p.validate()
                    })
                }
                _ => Ok(()),
            }
            .map_err(|e| Error::Config(format!("algorithm {}: {e}", a.name)))?;
        }
        self.model.build(self.dims).map_err(|e| Error::Config(format!("model: {e}")))?;
        Ok(())
    }

    pub fn score_options(&self) -> ScoreOptions {
        self.score.unwrap_or(if self.model.modality() == Modality::Cdi {
            ScoreOptions::cdi()
        } else {
            ScoreOptions::default()
        })
    }

    /// SNR cells in ascending order; the noiseless cell (`inf`) comes last.
    pub fn snr_cells(&self) -> Vec<f64> {
        let mut s = self.noise.snr_db.clone();
        s.sort_by(f64::total_cmp);
        s.dedup();
        if self.noise.noiseless {
            s.push(f64::INFINITY);
        }
        s
    }

    /// Override every seed-bearing entry with `seed` (noise, phantom, solver inits).
    pub fn reseed(&mut self, seed: u64) {
        self.noise.seed = seed;
        match &mut self.ground_truth {
            GroundTruth::Phantom(p) => p.seed = seed,
            GroundTruth::Random { seed: s } => *s = seed,
            GroundTruth::Image { .. } => {}
        }
    }
}

/// Seed for plane `plane` of the cell at `snr_db`; independent of the SNR list order.
pub fn noise_seed(base: u64, snr_db: f64, plane: usize) -> u64 {
    base.wrapping_add(snr_db.to_bits().wrapping_mul(0x9E37_79B9_7F4A_7C15)).wrapping_add(plane as u64)
}

/// Add seeded WGN to every plane at its own `mean(I^2)`; `inf` returns the input.
pub fn noisy_measurements(clean: &MeasurementSet, snr_db: f64, seed: u64) -> Result<MeasurementSet> {
    if snr_db == f64::INFINITY {
        return Ok(clean.clone());
    }
    clean.map_planes(|k, p| add_wgn(p, &NoiseSpec::new(snr_db, noise_seed(seed, snr_db, k))))
}

/// Per-cell diagnostics that do not fit the CSV schema.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellDetail {
    pub algorithm: String,
    pub snr_db: f64,
    pub score: Option<Score>,
    pub final_residual: Option<f64>,
    /// Strength schedule actually used (LPR).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub strengths: Vec<f64>,
    /// Shared warm-start time excluded from `wall_seconds` (LPR).
    pub shared_init_seconds: Option<f64>,
    #[serde(skip)]
    pub field: Option<ComplexField>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub rows: Vec<BenchRow>,
    pub details: Vec<CellDetail>,
    pub truth: ComplexField,
}

struct SnrContext {
    snr_db: f64,
    meas: MeasurementSet,
    /// Warm starts keyed by their serialized recipe, with build time.
    warm: BTreeMap<String, Result<(ComplexField, f64)>>,
}

fn warm_key(p: &LprParams) -> Option<String> {
    match p.init {
        LprInit::ApWarmstart { .. } | LprInit::Adjoint => {
            Some(serde_json::to_string(&(&p.init, &p.base_init, p.init_seed)).expect("plain data"))
        }
        LprInit::Provided => None,
    }
}

pub(crate) fn resolve_lpr(
    params: &Option<LprParams>,
    schedule: &Option<Schedule>,
    meas: &MeasurementSet,
    model: &Model,
    snr_db: f64,
) -> LprParams {
    let mut p = params.clone().unwrap_or_else(|| LprParams::for_modality(model.modality(), vec![]));
    let recipe = match schedule {
        Some(s) => Some(s.clone()),
        None if p.strength_schedule.is_empty() => Some(Schedule::NoiseEstimate { ratio: default_ratio() }),
        None => None,
    };
    if let Some(r) = recipe {
        p.strength_schedule = r.resolve(p.outer_max, meas, model, snr_db);
    }
    p
}

/// One solver run outside the grid.
#[derive(Clone, Debug)]
pub struct SolverRun {
    pub field: ComplexField,
    /// Excludes `shared_init_seconds` when a shared warm start was supplied.
    pub wall_seconds: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_residual: Option<f64>,
    pub strengths: Vec<f64>,
    pub shared_init_seconds: Option<f64>,
    /// Per-iteration trace as CSV.
    pub trace_csv: String,
}

/// Run one configured solver on `meas`. `truth` is needed only for the
/// `truth` start; `warm` is a prebuilt LPR warm start with its build time.
pub fn run_solver(
    spec: &SolverSpec,
    meas: &MeasurementSet,
    model: &Model,
    snr_db: f64,
    truth: Option<&ComplexField>,
    warm: Option<&(ComplexField, f64)>,
) -> Result<SolverRun> {
    let start_field = |start: &StartPoint| start.build(meas, model, truth);
    match spec {
        SolverSpec::Ap { params, start } => {
            let p = params.clone().unwrap_or_else(|| ApParams::for_modality(model.modality()));
            let t = Instant::now();
            let init = start_field(start)?;
            let (u, rep) = ap_solve(meas, model, &init, &p)?;
            Ok(SolverRun {
                field: u,
                wall_seconds: t.elapsed().as_secs_f64(),
                iterations: rep.iterations,
                converged: rep.converged,
                final_residual: rep.final_residual(),
                strengths: vec![],
                shared_init_seconds: None,
                trace_csv: run_report_csv(&rep),
            })
        }
        SolverSpec::Wf { params, start } => {
            let p = params.clone().unwrap_or_default();
            let t = Instant::now();
            let init = start_field(start)?;
            let (u, rep) = wf_baseline(meas, model, &init, &p)?;
            Ok(SolverRun {
                field: u,
                wall_seconds: t.elapsed().as_secs_f64(),
                iterations: rep.iterations,
                converged: rep.converged,
                final_residual: rep.final_residual(),
                strengths: vec![],
                shared_init_seconds: None,
                trace_csv: run_report_csv(&rep),
            })
        }
        SolverSpec::Lpr { params, schedule, enhancer, .. } => {
            let p = resolve_lpr(params, schedule, meas, model, snr_db);
            let (v, trace) = match warm {
                Some((v0, _)) => lpr_solve_from(meas, model, enhancer, &p, v0, None)?,
                None => lpr_solve(meas, model, enhancer, &p)?,
            };
            Ok(SolverRun {
                field: v,
                wall_seconds: trace.wall_seconds,
                iterations: trace.outer_iterations,
                converged: trace.converged,
                final_residual: trace.residuals.last().copied(),
                strengths: trace.strengths.clone(),
                shared_init_seconds: warm.map(|w| w.1),
                trace_csv: lpr_trace_csv(&trace),
            })
        }
    }
}

fn run_cell(
    alg: &AlgorithmConfig,
    ctx: &SnrContext,
    model: &Model,
    truth: &ComplexField,
    opts: &ScoreOptions,
    timing: bool,
) -> (BenchRow, CellDetail) {
    let mut detail = CellDetail {
        algorithm: alg.name.clone(),
        snr_db: ctx.snr_db,
        score: None,
        final_residual: None,
        strengths: vec![],
        shared_init_seconds: None,
        field: None,
    };
    let warm = match &alg.spec {
        SolverSpec::Lpr { params, schedule, shared_warmstart: true, .. } => {
            warm_key(&resolve_lpr(params, schedule, &ctx.meas, model, ctx.snr_db)).and_then(|k| ctx.warm.get(&k))
        }
        _ => None,
    };
    let outcome = match warm {
        Some(Err(e)) => Err(Error::Argument(format!("shared warm start failed: {e}"))),
        Some(Ok(w)) => run_solver(&alg.spec, &ctx.meas, model, ctx.snr_db, Some(truth), Some(w)),
        None => run_solver(&alg.spec, &ctx.meas, model, ctx.snr_db, Some(truth), None),
    }
    .map(|r| {
        detail.final_residual = r.final_residual;
        detail.strengths = r.strengths;
        detail.shared_init_seconds = r.shared_init_seconds;
        (r.field, r.wall_seconds, r.iterations, r.converged)
    });
    let (field, wall, iterations, converged, status) = match outcome {
        Ok((u, wall, it, conv)) => (Some(u), Some(wall), it, conv, "ok".to_string()),
        Err(Error::Divergence { iteration, last_finite }) => {
            (Some(*last_finite), None, iteration, false, format!("diverged at iteration {iteration}"))
        }
        Err(e) => (None, None, 0, false, format!("error: {e}")),
    };
    let s = field.as_ref().and_then(|u| score(u, truth, opts).ok());
    detail.score = s;
    detail.field = field;
    let row = BenchRow {
        algorithm: alg.name.clone(),
        snr_db: ctx.snr_db,
        psnr_db: s.map(|s| s.psnr),
        ssim: s.map(|s| s.ssim),
        wall_seconds: if timing { wall } else { None },
        iterations,
        converged,
        status,
    };
    (row, detail)
}

fn snr_label(snr: f64) -> String {
    if snr.is_finite() {
        format!("{snr}")
    } else {
        "inf".into()
    }
}

/// Run the full (algorithm x SNR) grid and write artifacts to the output directory, if any.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| run_grid(cfg))
}

fn run_grid(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let model = cfg.model.build(cfg.dims)?;
    let truth = cfg.ground_truth.load(cfg.dims)?;
    let clean = model.forward(&truth)?;
    let opts = cfg.score_options();

    let contexts: Vec<SnrContext> = cfg
        .snr_cells()
        .into_par_iter()
        .map(|snr_db| -> Result<SnrContext> {
            let meas = noisy_measurements(&clean, snr_db, cfg.noise.seed)?;
            let mut warm = BTreeMap::new();
            for alg in &cfg.algorithms {
                if let SolverSpec::Lpr { params, schedule, shared_warmstart: true, .. } = &alg.spec {
                    let p = resolve_lpr(params, schedule, &meas, &model, snr_db);
                    if let Some(key) = warm_key(&p) {
                        warm.entry(key).or_insert_with(|| {
                            let t = Instant::now();
                            lpr_initial(&meas, &model, &p).map(|v| (v, t.elapsed().as_secs_f64()))
                        });
                    }
                }
            }
            Ok(SnrContext { snr_db, meas, warm })
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, usize)> =
        (0..cfg.algorithms.len()).flat_map(|a| (0..contexts.len()).map(move |s| (a, s))).collect();
    let results: Vec<(BenchRow, CellDetail)> = cells
        .par_iter()
        .map(|&(a, s)| run_cell(&cfg.algorithms[a], &contexts[s], &model, &truth, &opts, cfg.output.timing))
        .collect();
    let (rows, details): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let outcome = ExperimentOutcome { rows, details, truth };
    if let Some(dir) = &cfg.output.dir {
        write_artifacts(cfg, &outcome, dir)?;
    }
    Ok(outcome)
}

fn write_field_images(dir: &Path, stem: &str, u: &ComplexField, amp_max: f64) -> Result<()> {
    io::write_png_gray(dir.join(format!("{stem}_amplitude.png")), &u.amplitude(), 0.0, amp_max, PngDepth::Eight)?;
    let pi = std::f64::consts::PI;
    io::write_png_gray(dir.join(format!("{stem}_phase.png")), &u.phase(), -pi, pi, PngDepth::Eight)?;
    io::write_lprf_complex(dir.join(format!("{stem}.lprf")), u)
}

fn write_artifacts(cfg: &ExperimentConfig, out: &ExperimentOutcome, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_rows_csv(dir.join("results.csv"), &out.rows)?;
    let amp_max = out.truth.amplitude().max().max(f64::MIN_POSITIVE);
    if cfg.output.images {
        write_field_images(dir, "truth", &out.truth, amp_max)?;
        out.details.par_iter().try_for_each(|d| -> Result<()> {
            match &d.field {
                Some(u) => {
                    let (aligned, _) = crate::ap::global_phase_align(u, &out.truth)?;
                    write_field_images(dir, &format!("{}_snr{}", d.algorithm, snr_label(d.snr_db)), &aligned, amp_max)
                }
                None => Ok(()),
            }
        })?;
    }
    let manifest = serde_json::json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "score_options": cfg.score_options(),
        "rows": out.rows,
        "cells": out.details,
    });
    std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest).expect("serializable"))?;
    Ok(())
}
