//! Benchmark orchestration: dataset adapters, run configuration, the
//! sample pipeline, ablation matrices, and report emission.

pub mod config;
pub mod dataset;
pub mod report;
pub mod runner;

pub use config::{
    default_matrix_rows, modality_set_label, run_config_digest, strategy_label, BackendKind,
    BackendSpec, DatasetConfig, MatrixConfig, MatrixRow, RunConfig,
};
pub use dataset::{parse_index_csv, ClassMapping, DatasetAdapter, IndexEntry, SampleRef};
pub use report::{emit_matrix, emit_run_report};
pub use runner::{rebuild_report, run_ablation, run_eval, AblationRowResult, RunMeta};

use thiserror::Error;

use crate::backend::BackendError;
use crate::metrics::MetricsError;
use crate::promptkit::PromptError;
use crate::raster::RasterError;
use crate::spectral::SpectralError;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("storage error at {path}: {detail}")]
    Storage { path: String, detail: String },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}
