//! Channel-serial CDP runs for images too large to hold every channel at once.
//!
//! Each colour channel is simulated, written to disk, dropped, and later
//! streamed back for reconstruction, so only one channel's working set is
//! resident. The enhancement step runs on overlapping tiles; the measurement
//! projection stays global per channel.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::experiment::{noisy_measurements, resolve_lpr, ExperimentConfig, GroundTruth, SolverSpec};
use super::phantom::random_field;
use super::score::{score, Score};
use crate::ap::{ap_solve, ApParams};
use crate::denoise::{Enhancer, Tiling};
use crate::error::{Error, Result};
use crate::field::{ComplexField, RealImage};
use crate::io::{self, PngDepth};
use crate::lpr::lpr_solve;
use crate::models::{MeasurementSet, Modality, Model};

const F64: usize = std::mem::size_of::<f64>();
const C64: usize = 2 * F64;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelOutcome {
    pub channel: usize,
    pub score: Score,
    pub wall_seconds: f64,
    pub iterations: usize,
    /// Reconstruction on disk (two-plane LPRF).
    pub field_path: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TiledOutcome {
    pub channels: Vec<ChannelOutcome>,
    pub dims: (usize, usize),
    pub masks: usize,
    pub tiling: Tiling,
    /// Estimated peak resident bytes of this run.
    pub peak_bytes_estimate: usize,
    /// Estimated peak for all channels in memory with a full-frame enhancer.
    pub untiled_bytes_estimate: usize,
    pub wall_seconds: f64,
    pub output_dir: PathBuf,
}

/// Resident bytes for `channels` simultaneous CDP reconstructions of `dims`
/// with `masks` masks, enhancer tiled by `tiling` (full frame when `None`).
///
/// Counts masks, measurements, the solver's complex iterates and per-mask
/// projection buffers, the split enhancer channels with their blend
/// accumulators, and the TV dual-variable working set.
pub fn peak_bytes_estimate(dims: (usize, usize), masks: usize, tiling: Option<Tiling>, channels: usize) -> usize {
    let n = dims.0 * dims.1;
    let shared = masks * n * C64;
    let per_channel_solver = masks * n * F64 + (4 + masks) * n * C64;
    let (split, working) = match tiling {
        Some(t) => (4 * n * F64, 6 * t.working_set_bytes()),
        None => (2 * n * F64, 6 * n * F64),
    };
    shared + channels * (per_channel_solver + split + working)
}

/// Ground-truth channels: RGB images channel-wise, procedural sources salted per channel.
fn channel_truth(cfg: &ExperimentConfig, channel: usize) -> Result<ComplexField> {
    let salt = channel as u64;
    match &cfg.ground_truth {
        GroundTruth::Phantom(p) => {
            let mut p = p.clone();
            p.seed = p.seed.wrapping_add(salt);
            p.field(cfg.dims.0, cfg.dims.1)
        }
        GroundTruth::Random { seed } => random_field(cfg.dims.0, cfg.dims.1, seed.wrapping_add(salt)),
        GroundTruth::Image { amplitude, amp_min, .. } => {
            let rgb = io::read_png_rgb(amplitude)?;
            let c = &rgb[channel.min(2)];
            if c.dims() != cfg.dims {
                return Err(Error::Config(format!(
                    "{} is {:?}, config dims are {:?}",
                    amplitude.display(),
                    c.dims(),
                    cfg.dims
                )));
            }
            Ok(ComplexField::from_real(&c.map(|a| amp_min + (1.0 - amp_min) * a)))
        }
    }
}

fn check(cfg: &ExperimentConfig, tile: (usize, usize)) -> Result<()> {
    cfg.validate()?;
    if cfg.model.modality() != Modality::Cdp {
        return Err(Error::Config("tiled runs support the CDP modality only".into()));
    }
    if tile.0 == 0 || tile.1 == 0 {
        return Err(Error::Config("tile dimensions must be >= 1".into()));
    }
    if tile.0 > cfg.dims.0 || tile.1 > cfg.dims.1 {
        return Err(Error::Config(format!(
            "tile {}x{} is larger than the {}x{} image",
            tile.0, tile.1, cfg.dims.0, cfg.dims.1
        )));
    }
    Ok(())
}

fn check_disk(dir: &Path, needed: u64) -> Result<()> {
    let free = fs4::available_space(dir)?;
    if free < needed {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::StorageFull,
            format!("insufficient disk space in {}: need {needed} bytes, {free} available", dir.display()),
        )));
    }
    Ok(())
}

fn meas_path(dir: &Path, channel: usize) -> PathBuf {
    dir.join(format!("channel{channel}_measurements.lprf"))
}

fn field_path(dir: &Path, channel: usize) -> PathBuf {
    dir.join(format!("channel{channel}_reconstruction.lprf"))
}

/// Simulate channel `channel` and write its noisy measurement stack to `dir`.
fn simulate_channel(cfg: &ExperimentConfig, model: &Model, snr_db: f64, channel: usize, dir: &Path) -> Result<()> {
    let truth = channel_truth(cfg, channel)?;
    let clean = model.forward(&truth)?;
    let meas = noisy_measurements(&clean, snr_db, cfg.noise.seed.wrapping_add(channel as u64))?;
    io::write_lprf(meas_path(dir, channel), &meas.planes)
}

/// Reconstruct one channel from its stack on disk with the tiled enhancer.
fn reconstruct_channel(
    cfg: &ExperimentConfig,
    model: &Model,
    tiling: Tiling,
    snr_db: f64,
    channel: usize,
    dir: &Path,
) -> Result<ChannelOutcome> {
    let planes = io::read_lprf(meas_path(dir, channel))?;
    let meas = MeasurementSet::new(Modality::Cdp, planes);
    let start = Instant::now();
    let (u, iterations) = match &cfg.algorithms[0].spec {
        SolverSpec::Lpr { params, schedule, enhancer, .. } => {
            let p = resolve_lpr(params, schedule, &meas, model, snr_db);
            let e = Enhancer { tiling: Some(tiling), ..enhancer.clone() };
            let (v, t) = lpr_solve(&meas, model, &e, &p)?;
            (v, t.outer_iterations)
        }
        SolverSpec::Ap { params, .. } => {
            let p = params.clone().unwrap_or_else(|| ApParams::for_modality(Modality::Cdp));
            let (u, r) = ap_solve(&meas, model, &model.default_init(&meas, 0)?, &p)?;
            (u, r.iterations)
        }
        SolverSpec::Wf { .. } => return Err(Error::Config("tiled runs take an LPR or AP algorithm".into())),
    };
    let wall_seconds = start.elapsed().as_secs_f64();
    drop(meas);
    let path = field_path(dir, channel);
    io::write_lprf_complex(&path, &u)?;
    let truth = channel_truth(cfg, channel)?;
    let s = score(&u, &truth, &cfg.score_options())?;
    Ok(ChannelOutcome { channel, score: s, wall_seconds, iterations, field_path: path })
}

/// Run the first algorithm of `cfg` on every colour channel at the first SNR
/// cell, channel after channel, with the enhancer tiled as `tile` plus `overlap`.
///
/// Artifacts go to `cfg.output.dir` (required).
pub fn tiled_run(cfg: &ExperimentConfig, tile: (usize, usize), overlap: usize) -> Result<TiledOutcome> {
    run_channels(cfg, tile, overlap, &[0, 1, 2])
}

/// [`tiled_run`] restricted to the given channels.
pub fn run_channels(
    cfg: &ExperimentConfig,
    tile: (usize, usize),
    overlap: usize,
    channels: &[usize],
) -> Result<TiledOutcome> {
    check(cfg, tile)?;
    let dir = cfg.output.dir.clone().ok_or_else(|| Error::Config("tiled runs need output.dir".into()))?;
    std::fs::create_dir_all(&dir)?;
    let start = Instant::now();
    let model = cfg.model.build(cfg.dims)?;
    let (masks, n) = (model.plane_count(), cfg.dims.0 * cfg.dims.1);
    let stack_bytes = 16 + masks * n * 4;
    check_disk(&dir, (channels.len() * (stack_bytes + 16 + 2 * n * 4)) as u64)?;
    let snr_db = *cfg.snr_cells().first().expect("validated");
    let tiling = Tiling { tile_h: tile.0, tile_w: tile.1, overlap };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let channels_out = pool.install(|| -> Result<Vec<ChannelOutcome>> {
        for &c in channels {
            simulate_channel(cfg, &model, snr_db, c, &dir)?;
        }
        channels.iter().map(|&c| reconstruct_channel(cfg, &model, tiling, snr_db, c, &dir)).collect()
    })?;
    let outcome = TiledOutcome {
        channels: channels_out,
        dims: cfg.dims,
        masks,
        tiling,
        peak_bytes_estimate: peak_bytes_estimate(cfg.dims, masks, Some(tiling), 1),
        untiled_bytes_estimate: peak_bytes_estimate(cfg.dims, masks, None, channels.len()),
        wall_seconds: start.elapsed().as_secs_f64(),
        output_dir: dir.clone(),
    };
    if cfg.output.images {
        write_composite(&outcome, &dir)?;
    }
    let manifest = serde_json::json!({ "config": cfg, "tile": tile, "overlap": overlap, "outcome": &outcome });
    std::fs::write(dir.join("tiled_manifest.json"), serde_json::to_string_pretty(&manifest).expect("serializable"))?;
    log::info!(
        "tiled run {}x{} x{} channels: {:.1} s ({:.2} min), peak estimate {} MiB vs {} MiB untiled",
        cfg.dims.0,
        cfg.dims.1,
        outcome.channels.len(),
        outcome.wall_seconds,
        outcome.wall_seconds / 60.0,
        outcome.peak_bytes_estimate >> 20,
        outcome.untiled_bytes_estimate >> 20
    );
    Ok(outcome)
}

/// Per-channel amplitude PNGs plus an RGB composite, one channel resident at a time.
fn write_composite(out: &TiledOutcome, dir: &Path) -> Result<()> {
    let (h, w) = out.dims;
    let mut rgb = vec![0u8; h * w * 3];
    for ch in &out.channels {
        let amp: RealImage = io::read_lprf_complex(&ch.field_path)?.amplitude();
        let hi = amp.max().max(f64::MIN_POSITIVE);
        io::write_png_gray(dir.join(format!("channel{}_amplitude.png", ch.channel)), &amp, 0.0, hi, PngDepth::Eight)?;
        if ch.channel < 3 {
            for (k, &a) in amp.data().iter().enumerate() {
                rgb[k * 3 + ch.channel] = ((a / hi).clamp(0.0, 1.0) * 255.0).round() as u8;
            }
        }
    }
    image::RgbImage::from_raw(w as u32, h as u32, rgb).expect("sized buffer").save(dir.join("amplitude_rgb.png"))?;
    Ok(())
}
