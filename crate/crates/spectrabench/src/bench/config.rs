//! Declarative run and ablation-matrix configuration.
//!
//! One JSON file describes a run end to end: dataset paths, prompting
//! strategy, modality subset, backend selection, normalization, limits, and
//! seed. CLI flags override individual keys. The run digest covers every
//! semantically relevant field (never filesystem paths), so reports from
//! equal configurations share a digest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::GenerationParams;
use crate::promptkit::{PromptStrategy, StrategyVariant, TaskKind};
use crate::raster::NormalizationBounds;
use crate::spectral::ModalityKind;

use super::BenchError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    /// Index CSV: `sample_id,manifest,labels` with `;`-separated labels.
    pub index: PathBuf,
    /// Vocabulary JSON; its `task` field decides multi-label vs multi-class.
    pub vocabulary: PathBuf,
    /// Optional source-label to class mapping (e.g. the 43-to-19 table).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_mapping: Option<PathBuf>,
    /// Optional alias table applied before matching model output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aliases: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BackendKind {
    Http {
        endpoint: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        api_key_env: Option<String>,
        #[serde(default = "default_max_attempts")]
        max_attempts: u32,
        #[serde(default = "default_timeout_ms")]
        timeout_ms: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        requests_per_minute: Option<u32>,
        #[serde(default = "default_max_in_flight")]
        max_in_flight: usize,
    },
    Replay {
        fixture_dir: PathBuf,
    },
    /// Answers every sample with its own ground truth on an ANSWER line;
    /// validates the full pipeline independent of any model.
    EchoMock,
    /// Returns the same text for every request (empty by default).
    StaticMock {
        #[serde(default)]
        text: String,
    },
}

impl BackendKind {
    pub fn tag(&self) -> &'static str {
        match self {
            BackendKind::Http { .. } => "http",
            BackendKind::Replay { .. } => "replay",
            BackendKind::EchoMock => "echo-mock",
            BackendKind::StaticMock { .. } => "static-mock",
        }
    }
}

fn default_max_attempts() -> u32 {
    3
}

fn default_timeout_ms() -> u64 {
    60_000
}

fn default_max_in_flight() -> usize {
    4
}

fn default_model_id() -> String {
    "offline".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendSpec {
    #[serde(default = "default_model_id")]
    pub model_id: String,
    #[serde(flatten)]
    pub kind: BackendKind,
    /// Wrap with the disk cache (outermost, so hits skip recording too).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    /// Wrap with the fixture recorder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_dir: Option<PathBuf>,
}

fn default_strategy() -> PromptStrategy {
    PromptStrategy::baseline()
}

fn default_modalities() -> Vec<ModalityKind> {
    ModalityKind::ALL.to_vec()
}

fn default_workers() -> usize {
    1
}

fn default_target_resolution() -> u32 {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    #[serde(default = "default_strategy")]
    pub strategy: PromptStrategy,
    #[serde(default = "default_modalities")]
    pub modalities: Vec<ModalityKind>,
    pub backend: BackendSpec,
    #[serde(default)]
    pub normalization: NormalizationBounds,
    /// Deterministic subset size; absent means the whole index.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_limit: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_target_resolution")]
    pub target_resolution: u32,
    #[serde(default)]
    pub generation: GenerationParams,
}

impl RunConfig {
    pub fn from_json_str(json: &str) -> Result<Self, BenchError> {
        let config: RunConfig =
            serde_json::from_str(json).map_err(|e| BenchError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<Self, BenchError> {
        let json = std::fs::read_to_string(path).map_err(|e| BenchError::Storage {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let mut config = Self::from_json_str(&json)?;
        config.resolve_paths(path.parent().unwrap_or_else(|| Path::new(".")));
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.modalities.is_empty() {
            return Err(BenchError::Config("modalities must be non-empty".into()));
        }
        if self.workers == 0 {
            return Err(BenchError::Config("workers must be at least 1".into()));
        }
        if self.target_resolution == 0 {
            return Err(BenchError::Config(
                "target_resolution must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Resolves relative dataset paths against the config file's directory.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset.index);
        fix(&mut self.dataset.vocabulary);
        if let Some(p) = self.dataset.class_mapping.as_mut() {
            fix(p);
        }
        if let Some(p) = self.dataset.aliases.as_mut() {
            fix(p);
        }
        match &mut self.backend.kind {
            BackendKind::Replay { fixture_dir } => fix(fixture_dir),
            BackendKind::Http { .. } | BackendKind::EchoMock | BackendKind::StaticMock { .. } => {}
        }
        if let Some(p) = self.backend.cache_dir.as_mut() {
            fix(p);
        }
        if let Some(p) = self.backend.record_dir.as_mut() {
            fix(p);
        }
        if let Some(p) = self.output_dir.as_mut() {
            fix(p);
        }
    }

    /// Modalities in canonical order with duplicates removed.
    pub fn canonical_modalities(&self) -> Vec<ModalityKind> {
        let mut kinds = self.modalities.clone();
        kinds.sort();
        kinds.dedup();
        kinds
    }
}

#[derive(Serialize)]
struct DigestView<'a> {
    dataset: &'a str,
    task: TaskKind,
    strategy: &'a PromptStrategy,
    modalities: Vec<&'static str>,
    normalization: &'a NormalizationBounds,
    sample_limit: Option<usize>,
    seed: u64,
    target_resolution: u32,
    generation: &'a GenerationParams,
    model_id: &'a str,
    backend_kind: &'static str,
}

/// Digest over the semantic run configuration. Filesystem locations are
/// excluded so moving data around never changes a run's identity.
pub fn run_config_digest(config: &RunConfig, task: TaskKind) -> String {
    use sha2::{Digest, Sha256};
    let view = DigestView {
        dataset: &config.dataset.name,
        task,
        strategy: &config.strategy,
        modalities: config
            .canonical_modalities()
            .iter()
            .map(|k| k.token())
            .collect(),
        normalization: &config.normalization,
        sample_limit: config.sample_limit,
        seed: config.seed,
        target_resolution: config.target_resolution,
        generation: &config.generation,
        model_id: &config.backend.model_id,
        backend_kind: config.backend.kind.tag(),
    };
    let json = serde_json::to_vec(&view).expect("digest view serializes");
    let mut hasher = Sha256::new();
    hasher.update(&json);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

// ---------------------------------------------------------------------------
// Ablation matrix
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub strategy: PromptStrategy,
    pub modalities: Vec<ModalityKind>,
}

/// The shipped default matrix: Baseline over four modality subsets,
/// Expansion over the full set, CoT over four subsets, and the two CoT
/// description ablations. Eleven rows in total.
pub fn default_matrix_rows() -> Vec<MatrixRow> {
    use ModalityKind::*;
    let rgb = vec![TrueColor];
    let rgb_ndvi = vec![TrueColor, Ndvi];
    let rgb_ndvi_ndwi = vec![TrueColor, Ndvi, Ndwi];
    let all = ModalityKind::ALL.to_vec();
    let row = |strategy: PromptStrategy, modalities: Vec<ModalityKind>| MatrixRow {
        strategy,
        modalities,
    };
    vec![
        row(PromptStrategy::baseline(), rgb.clone()),
        row(PromptStrategy::baseline(), rgb_ndvi.clone()),
        row(PromptStrategy::baseline(), rgb_ndvi_ndwi.clone()),
        row(PromptStrategy::baseline(), all.clone()),
        row(PromptStrategy::expansion(), all.clone()),
        row(PromptStrategy::cot(), rgb),
        row(PromptStrategy::cot(), rgb_ndvi),
        row(PromptStrategy::cot(), rgb_ndvi_ndwi),
        row(PromptStrategy::cot(), all.clone()),
        row(
            PromptStrategy {
                include_band_catalog: false,
                ..PromptStrategy::cot()
            },
            all.clone(),
        ),
        row(
            PromptStrategy {
                include_image_descriptors: false,
                ..PromptStrategy::cot()
            },
            all,
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixConfig {
    pub base: RunConfig,
    /// Rows override the base strategy and modality subset; an empty list
    /// selects the shipped default matrix.
    #[serde(default)]
    pub rows: Vec<MatrixRow>,
}

impl MatrixConfig {
    pub fn from_file(path: &Path) -> Result<Self, BenchError> {
        let json = std::fs::read_to_string(path).map_err(|e| BenchError::Storage {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let mut config: MatrixConfig =
            serde_json::from_str(&json).map_err(|e| BenchError::Config(e.to_string()))?;
        config
            .base
            .resolve_paths(path.parent().unwrap_or_else(|| Path::new(".")));
        config.base.validate()?;
        Ok(config)
    }

    pub fn effective_rows(&self) -> Vec<MatrixRow> {
        if self.rows.is_empty() {
            default_matrix_rows()
        } else {
            self.rows.clone()
        }
    }
}

// ---------------------------------------------------------------------------
// Row labels
// ---------------------------------------------------------------------------

pub fn strategy_label(strategy: &PromptStrategy) -> String {
    match strategy.variant {
        StrategyVariant::Baseline => "Baseline".into(),
        StrategyVariant::Expansion => "Expansion".into(),
        StrategyVariant::Cot => {
            if !strategy.include_band_catalog {
                "CoT w/o band description".into()
            } else if !strategy.include_image_descriptors {
                "CoT w/o pseudo-image description".into()
            } else if strategy.with_expansion {
                "CoT + Expansion".into()
            } else {
                "CoT".into()
            }
        }
    }
}

pub fn modality_set_label(kinds: &[ModalityKind]) -> String {
    let mut kinds = kinds.to_vec();
    kinds.sort();
    kinds.dedup();
    if kinds == ModalityKind::ALL.to_vec() {
        return "All Multi-Spectral".into();
    }
    if kinds == vec![ModalityKind::TrueColor] {
        return "RGB Only".into();
    }
    kinds
        .iter()
        .map(|k| k.label())
        .collect::<Vec<_>>()
        .join(" + ")
}
