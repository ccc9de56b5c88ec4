//! `lpr`: simulate, reconstruct, benchmark and score phase-retrieval runs.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use lpr_core::denoise::{box_blur3, ExternalBridge};
use lpr_core::harness::{
    rows_to_csv, run_experiment, run_solver, score, tiled_run, ExperimentConfig, Phantom, ScoreOptions,
};
use lpr_core::io::{self, PngDepth};
use lpr_core::{metrics, ComplexField, Error, MeasurementSet, RealImage};

#[derive(Parser, Debug)]
#[command(name = "lpr", version, about = "Phase retrieval with alternating projection and plug-in enhancers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads; all cores when unset.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override every seed in the config (noise, procedural ground truth).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a noisy measurement stack from the config's ground truth.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Measurement SNR in dB; defaults to the config's first SNR cell.
        #[arg(long)]
        snr: Option<f64>,
    },
    /// Reconstruct a field from a measurement stack.
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
        /// LPRF measurement stack.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Algorithm name from the config; the first entry when unset.
        #[arg(long)]
        algorithm: Option<String>,
        /// SNR used by noise-driven strength schedules; the config's first SNR cell when unset.
        #[arg(long)]
        snr: Option<f64>,
        /// Two-plane LPRF ground truth to score against.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Run the (algorithm x SNR) grid and print the CSV table.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Artifact directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Channel-serial CDP run with the enhancer tiled as `<h>x<w>`.
        #[arg(long, value_parser = parse_tile)]
        tile: Option<(usize, usize)>,
        /// Tile halo in pixels.
        #[arg(long, default_value_t = 16)]
        overlap: usize,
    },
    /// Score a test image against a reference (PNG or LPRF).
    Metrics {
        reference: PathBuf,
        test: PathBuf,
        /// PSNR peak; the reference maximum when unset.
        #[arg(long)]
        peak: Option<f64>,
    },
    /// Check an external enhancer command against the file protocol.
    DenoiseBridgeTest {
        #[arg(long, default_value_t = 0.1)]
        sigma: f64,
        #[arg(long, default_value_t = 30.0)]
        timeout: f64,
        /// Side of the square test image.
        #[arg(long, default_value_t = 64)]
        size: usize,
        /// Command and arguments; the exchange directory is appended.
        #[arg(required = true, trailing_var_arg = true, allow_hyphen_values = true)]
        command: Vec<String>,
    },
}

fn parse_tile(s: &str) -> Result<(usize, usize), String> {
    let (h, w) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected <h>x<w>, got {s:?}"))?;
    let h = h.trim().parse().map_err(|e| format!("tile height: {e}"))?;
    let w = w.trim().parse().map_err(|e| format!("tile width: {e}"))?;
    Ok((h, w))
}

/// Error with the process exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl Failure {
    fn solver(err: Error) -> Self {
        let code = if matches!(err, Error::Config(_)) { 2 } else { 3 };
        Self { code, err: err.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(err: anyhow::Error) -> Self {
        let code = match err.downcast_ref::<Error>() {
            Some(Error::Config(_)) => 2,
            _ => 1,
        };
        Self { code, err }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        anyhow::Error::from(err).into()
    }
}

impl fmt::Debug for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.err)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn config_error(msg: impl Into<String>) -> Failure {
    Error::Config(msg.into()).into()
}

fn load_config(path: &Path, cli_seed: Option<u64>, threads: Option<usize>) -> Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli_seed {
        cfg.reseed(seed);
    }
    if let Some(n) = threads {
        cfg.threads = Some(n);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    if cli.threads == Some(0) {
        return Err(config_error("--threads must be >= 1"));
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("thread pool")?;
    }
    match cli.command {
        Command::Simulate { config, out, snr } => simulate(&load_config(&config, cli.seed, cli.threads)?, &out, snr),
        Command::Reconstruct { config, input, out, algorithm, snr, truth } => {
            let cfg = load_config(&config, cli.seed, cli.threads)?;
            reconstruct(&cfg, &input, &out, algorithm.as_deref(), snr, truth.as_deref())
        }
        Command::Bench { config, out, tile, overlap } => {
            let mut cfg = load_config(&config, cli.seed, cli.threads)?;
            if out.is_some() {
                cfg.output.dir = out;
            }
            bench(&cfg, tile, overlap)
        }
        Command::Metrics { reference, test, peak } => metrics_cmd(&reference, &test, peak),
        Command::DenoiseBridgeTest { sigma, timeout, size, command } => {
            bridge_test(command, sigma, timeout, size, cli.seed.unwrap_or(0))
        }
    }
}

fn default_snr(cfg: &ExperimentConfig, snr: Option<f64>) -> f64 {
    snr.unwrap_or_else(|| cfg.snr_cells()[0])
}

fn write_field(dir: &Path, stem: &str, u: &ComplexField) -> anyhow::Result<()> {
    let amp = u.amplitude();
    let pi = std::f64::consts::PI;
    io::write_lprf_complex(dir.join(format!("{stem}.lprf")), u)?;
    io::write_png_gray(
        dir.join(format!("{stem}_amplitude.png")),
        &amp,
        0.0,
        amp.max().max(f64::MIN_POSITIVE),
        PngDepth::Eight,
    )?;
    io::write_png_gray(dir.join(format!("{stem}_phase.png")), &u.phase(), -pi, pi, PngDepth::Eight)?;
    Ok(())
}

fn write_json(path: &Path, v: &serde_json::Value) -> anyhow::Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn simulate(cfg: &ExperimentConfig, out: &Path, snr: Option<f64>) -> Result<(), Failure> {
    let snr_db = default_snr(cfg, snr);
    if snr_db.is_nan() {
        return Err(config_error("--snr must not be NaN"));
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let model = cfg.model.build(cfg.dims)?;
    let truth = cfg.ground_truth.load(cfg.dims)?;
    let meas = lpr_core::harness::noisy_measurements(&model.forward(&truth)?, snr_db, cfg.noise.seed)?;
    io::write_lprf(out.join("measurements.lprf"), &meas.planes)?;
    write_field(out, "truth", &truth)?;
    let plane_dims = model.plane_dims();
    write_json(
        &out.join("simulation.json"),
        &serde_json::json!({
            "config": cfg,
            "snr_db": if snr_db.is_finite() { serde_json::json!(snr_db) } else { serde_json::json!("inf") },
            "planes": meas.planes.len(),
            "plane_dims": [plane_dims.0, plane_dims.1],
        }),
    )?;
    println!(
        "{} planes of {}x{} -> {}",
        meas.planes.len(),
        plane_dims.0,
        plane_dims.1,
        out.join("measurements.lprf").display()
    );
    Ok(())
}

fn reconstruct(
    cfg: &ExperimentConfig,
    input: &Path,
    out: &Path,
    algorithm: Option<&str>,
    snr: Option<f64>,
    truth: Option<&Path>,
) -> Result<(), Failure> {
    let alg = match algorithm {
        Some(name) => cfg
            .algorithms
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| config_error(format!("no algorithm named {name:?} in the config")))?,
        None => &cfg.algorithms[0],
    };
    let model = cfg.model.build(cfg.dims)?;
    let planes = io::read_lprf(input).with_context(|| format!("reading {}", input.display()))?;
    let meas = MeasurementSet::new(model.modality(), planes);
    model.validate(&meas).map_err(|e| config_error(format!("{} does not match the config: {e}", input.display())))?;
    let truth =
        truth.map(|p| io::read_lprf_complex(p).with_context(|| format!("reading {}", p.display()))).transpose()?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let t = Instant::now();
    let result = run_solver(&alg.spec, &meas, &model, default_snr(cfg, snr), truth.as_ref(), None);
    let run = match result {
        Ok(r) => r,
        Err(Error::Divergence { iteration, last_finite }) => {
            write_field(out, "last_finite", &last_finite)?;
            return Err(Failure::solver(Error::Divergence { iteration, last_finite }));
        }
        Err(e) => return Err(Failure::solver(e)),
    };
    let wall = t.elapsed().as_secs_f64();
    write_field(out, "reconstruction", &run.field)?;
    std::fs::write(out.join("trace.csv"), &run.trace_csv).context("writing trace.csv")?;
    let scores = match &truth {
        Some(t) => Some(score(&run.field, t, &cfg.score_options())?),
        None => None,
    };
    write_json(
        &out.join("report.json"),
        &serde_json::json!({
            "algorithm": alg.name,
            "spec": alg.spec,
            "iterations": run.iterations,
            "converged": run.converged,
            "wall_seconds": wall,
            "final_residual": run.final_residual,
            "strengths": run.strengths,
            "score": scores,
        }),
    )?;
    let summary = match scores {
        Some(s) => format!(", psnr {:.3} dB, ssim {:.4}", s.psnr, s.ssim),
        None => String::new(),
    };
    println!("{}: {} iterations, converged {}, {wall:.2} s{summary}", alg.name, run.iterations, run.converged);
    Ok(())
}

fn bench(cfg: &ExperimentConfig, tile: Option<(usize, usize)>, overlap: usize) -> Result<(), Failure> {
    match tile {
        Some(tile) => {
            let outcome = tiled_run(cfg, tile, overlap)?;
            println!("{}", serde_json::to_string_pretty(&outcome).context("serializing outcome")?);
        }
        None => {
            let outcome = run_experiment(cfg)?;
            print!("{}", rows_to_csv(&outcome.rows));
        }
    }
    Ok(())
}

enum Loaded {
    Real(RealImage),
    Complex(ComplexField),
}

fn load_image(path: &Path) -> anyhow::Result<Loaded> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    Ok(match ext.as_str() {
        "lprf" => {
            let mut planes = io::read_lprf(path).with_context(|| format!("reading {}", path.display()))?;
            match planes.len() {
                1 => Loaded::Real(planes.remove(0)),
                2 => Loaded::Complex(io::read_lprf_complex(path)?),
                n => return Err(anyhow!("{}: expected 1 or 2 planes, found {n}", path.display())),
            }
        }
        _ => Loaded::Real(io::read_png_gray(path).with_context(|| format!("reading {}", path.display()))?),
    })
}

fn metrics_cmd(reference: &Path, test: &Path, peak: Option<f64>) -> Result<(), Failure> {
    let report = match (load_image(reference)?, load_image(test)?) {
        (Loaded::Real(r), Loaded::Real(t)) => {
            let peak = peak.unwrap_or_else(|| r.max());
            serde_json::json!({
                "psnr_db": metrics::psnr(&r, &t, peak)?,
                "ssim": metrics::ssim(&r, &t)?,
            })
        }
        (Loaded::Complex(r), Loaded::Complex(t)) => {
            let s = score(&t, &r, &ScoreOptions::default())?;
            serde_json::json!({ "psnr_db": s.psnr, "ssim": s.ssim, "phase_rmse": s.phase_rmse })
        }
        _ => return Err(anyhow!("reference and test must both be real or both complex").into()),
    };
    println!("{}", serde_json::to_string(&report).context("serializing metrics")?);
    Ok(())
}

fn bridge_test(command: Vec<String>, sigma: f64, timeout: f64, size: usize, seed: u64) -> Result<(), Failure> {
    if size < 3 {
        return Err(config_error("--size must be >= 3"));
    }
    let input = Phantom::new(seed).scene(size, size, 0)?;
    let bridge = ExternalBridge::new(command).with_timeout(timeout);
    let t = Instant::now();
    let output = bridge.run(&input, sigma)?;
    let seconds = t.elapsed().as_secs_f64();
    if output.data().iter().any(|x| !x.is_finite()) {
        return Err(Error::Bridge("response contains non-finite samples".into()).into());
    }
    let max_diff =
        |a: &RealImage, b: &RealImage| a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let report = serde_json::json!({
        "ok": true,
        "seconds": seconds,
        "dims": [size, size],
        "sigma": sigma,
        "max_abs_change": max_diff(&input, &output),
        "max_abs_diff_box_blur3": max_diff(&box_blur3(&input), &output),
    });
    println!("{}", serde_json::to_string_pretty(&report).context("serializing report")?);
    Ok(())
}
