//! Experiment harness: ground truth, scoring, benchmark grid, tiled runs.

pub mod experiment;
pub mod phantom;
pub mod report;
pub mod score;
pub mod tiled;

pub use experiment::{
    noisy_measurements, run_experiment, run_solver, AlgorithmConfig, ExperimentConfig, ExperimentOutcome, GroundTruth,
    NoiseConfig, OutputConfig, Schedule, SolverRun, SolverSpec, StartPoint,
};
pub use phantom::{random_field, Phantom};
pub use report::{rows_to_csv, BenchRow, CSV_HEADER};
pub use score::{score, Score, ScoreOptions};
pub use tiled::{tiled_run, TiledOutcome};
