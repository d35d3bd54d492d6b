//! Run orchestration: scene -> pseudo-images -> prompt -> backend -> parse
//! -> score, over a worker pool, with per-sample artifacts for audit.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{
    Backend, CachingBackend, HttpBackend, HttpBackendConfig, ModelRequest, RecordingBackend,
    ReplayBackend, ScriptedBackend, StaticBackend,
};
use crate::metrics::{
    aggregate_multilabel, score_sample, top1_accuracy, Aggregate, AveragingMode, BackendStats,
    EvalReport, MultiLabelSample, ParseStats, SampleRecord,
};
use crate::parse::{LabelSet, ParseMode, ResponseParser};
use crate::promptkit::{build_prompt, PromptBundle, StrategyVariant, TaskKind};
use crate::raster::{align_to_common_grid, load_scene};
use crate::spectral::render_modalities;

use super::config::{run_config_digest, BackendKind, RunConfig};
use super::dataset::{DatasetAdapter, SampleRef};
use super::report::emit_run_report;
use super::BenchError;

/// Everything `report` needs to re-emit a run from its stored artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub run_config_digest: String,
    pub dataset: String,
    pub task: TaskKind,
    pub backend_identity: String,
    pub strategy_label: String,
    pub modality_label: String,
    pub seed: u64,
    pub sample_limit: Option<usize>,
    pub sample_order: Vec<String>,
    pub backend_stats: BackendStats,
}

/// Deterministic subset selection: a seeded shuffle picks `limit` indices,
/// which are then visited in ascending order so artifacts diff cleanly.
pub fn select_sample_indices(total: usize, limit: Option<usize>, seed: u64) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..total).collect();
    if let Some(limit) = limit {
        if limit < total {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            indices.shuffle(&mut rng);
            indices.truncate(limit);
            indices.sort_unstable();
        }
    }
    indices
}

/// Renders the sample's modalities and assembles its prompt and request.
/// Shared between the live pipeline and the echo-mock pre-pass so both see
/// identical request bytes.
pub fn build_request(
    config: &RunConfig,
    adapter: &DatasetAdapter,
    sample: &SampleRef,
) -> Result<(ModelRequest, PromptBundle), BenchError> {
    let scene = load_scene(&sample.manifest_path)?;
    let scene = align_to_common_grid(&scene, config.target_resolution)?;
    let kinds = config.canonical_modalities();
    let images = render_modalities(&scene, &kinds, &config.normalization)?;
    let bundle = build_prompt(images, &adapter.vocabulary, config.strategy)?;
    let mut pngs = Vec::with_capacity(bundle.images.len());
    for image in &bundle.images {
        pngs.push(image.png_bytes()?);
    }
    let request = ModelRequest {
        model_id: config.backend.model_id.clone(),
        instruction_text: bundle.instruction_text.clone(),
        images: pngs,
        params: config.generation,
    };
    Ok((request, bundle))
}

fn build_backend(
    config: &RunConfig,
    adapter: &DatasetAdapter,
    selected: &[&SampleRef],
) -> Result<Box<dyn Backend>, BenchError> {
    let base: Box<dyn Backend> = match &config.backend.kind {
        BackendKind::Http {
            endpoint,
            api_key_env,
            max_attempts,
            timeout_ms,
            requests_per_minute,
            max_in_flight,
        } => {
            let mut http = HttpBackendConfig {
                endpoint: endpoint.clone(),
                model_id: config.backend.model_id.clone(),
                max_attempts: *max_attempts,
                timeout: std::time::Duration::from_millis(*timeout_ms),
                requests_per_minute: *requests_per_minute,
                max_in_flight: *max_in_flight,
                ..Default::default()
            };
            if let Some(env) = api_key_env {
                http.api_key_env = env.clone();
            }
            Box::new(HttpBackend::with_ureq(http))
        }
        BackendKind::Replay { fixture_dir } => Box::new(ReplayBackend::new(fixture_dir)),
        BackendKind::EchoMock => {
            let mut scripted = ScriptedBackend::new();
            for sample in selected {
                let (request, _) = build_request(config, adapter, sample)?;
                scripted.insert(&request, format!("ANSWER: {}", sample.truth.join("; ")));
            }
            Box::new(scripted)
        }
        BackendKind::StaticMock { text } => Box::new(StaticBackend::new(text.clone())),
    };
    let recorded: Box<dyn Backend> = match &config.backend.record_dir {
        Some(dir) => Box::new(RecordingBackend::new(base, dir)),
        None => base,
    };
    let cached: Box<dyn Backend> = match &config.backend.cache_dir {
        Some(dir) => Box::new(CachingBackend::new(recorded, dir)),
        None => recorded,
    };
    Ok(cached)
}

struct RawOutcome {
    sample_id: String,
    truth: Vec<String>,
    predicted: Vec<String>,
    parse_mode: ParseMode,
    unmatched: Vec<String>,
    error: Option<String>,
    from_cache: bool,
    prompt_text: String,
    response_text: String,
}

fn process_sample(
    config: &RunConfig,
    adapter: &DatasetAdapter,
    sample: &SampleRef,
    backend: &dyn Backend,
    parser: &ResponseParser,
) -> Result<RawOutcome, BenchError> {
    let (request, bundle) = build_request(config, adapter, sample)?;
    let (response_text, from_cache, error) = match backend.send(&request) {
        Ok(response) => (response.text, response.from_cache, None),
        // Backend failures skip-and-record: the sample scores as an empty
        // parse with the error kept visible in the report.
        Err(err) => (String::new(), false, Some(err.to_string())),
    };
    let outcome = parser.parse(&response_text);
    Ok(RawOutcome {
        sample_id: sample.sample_id.clone(),
        truth: sample.truth.clone(),
        predicted: outcome.label_set.labels,
        parse_mode: if error.is_some() {
            ParseMode::Empty
        } else {
            outcome.parse_mode
        },
        unmatched: outcome.label_set.unmatched,
        error,
        from_cache,
        prompt_text: bundle.instruction_text,
        response_text,
    })
}

/// Replaces anything outside `[A-Za-z0-9._-]` so sample ids are safe as
/// directory names.
pub fn sanitize_id(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), BenchError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| BenchError::Storage {
            path: parent.display().to_string(),
            detail: e.to_string(),
        })?;
    }
    std::fs::write(path, bytes).map_err(|e| BenchError::Storage {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

/// Executes one run configuration and returns its report. When an output
/// directory is configured, per-sample artifacts (prompt, response, parsed
/// record) and the report files are persisted there.
pub fn run_eval(config: &RunConfig) -> Result<EvalReport, BenchError> {
    config.validate()?;
    let adapter = DatasetAdapter::load(&config.dataset)?;
    if adapter.samples.is_empty() {
        return Err(BenchError::Dataset("dataset has no usable samples".into()));
    }
    let indices = select_sample_indices(adapter.samples.len(), config.sample_limit, config.seed);
    let selected: Vec<&SampleRef> = indices.iter().map(|&i| &adapter.samples[i]).collect();
    let backend = build_backend(config, &adapter, &selected)?;
    let parser = ResponseParser::with_aliases(&adapter.vocabulary, &adapter.aliases)
        .cot_aware(matches!(config.strategy.variant, StrategyVariant::Cot));

    let n = selected.len();
    let cursor = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<RawOutcome, BenchError>>>> =
        Mutex::new((0..n).map(|_| None).collect());
    let workers = config.workers.min(n).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let outcome = process_sample(config, &adapter, selected[i], &backend, &parser);
                slots.lock().unwrap()[i] = Some(outcome);
            });
        }
    });

    let outcomes: Vec<RawOutcome> = slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("worker pool filled every slot"))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;

    let digest = run_config_digest(config, adapter.task_kind);
    let mut parse_stats = ParseStats::default();
    let mut backend_stats = BackendStats::default();
    let mut per_sample = Vec::with_capacity(outcomes.len());
    let mut ml_samples: Vec<MultiLabelSample> = Vec::new();
    let mut mc_records: Vec<(Option<String>, String)> = Vec::new();

    for outcome in &outcomes {
        parse_stats.record(outcome.parse_mode, outcome.unmatched.len());
        backend_stats.requests += 1;
        if outcome.from_cache {
            backend_stats.served_from_cache_or_fixture += 1;
        }
        if outcome.error.is_some() {
            backend_stats.failures += 1;
        }
        let mut record = SampleRecord {
            sample_id: outcome.sample_id.clone(),
            predicted: outcome.predicted.clone(),
            truth: outcome.truth.clone(),
            parse_mode: outcome.parse_mode,
            unmatched: outcome.unmatched.clone(),
            score: None,
            correct: None,
            error: outcome.error.clone(),
        };
        match adapter.task_kind {
            TaskKind::MultiLabel => {
                let pred = LabelSet::from_labels(outcome.predicted.iter().cloned());
                let truth = LabelSet::from_labels(outcome.truth.iter().cloned());
                let scored = score_sample(&pred, &truth)?;
                record.score = Some(scored.score);
                ml_samples.push(scored);
            }
            TaskKind::MultiClass => {
                let predicted = outcome.predicted.first().cloned();
                let truth = outcome.truth[0].clone();
                record.correct = Some(predicted.as_deref() == Some(truth.as_str()));
                mc_records.push((predicted, truth));
            }
        }
        per_sample.push(record);
    }

    let aggregate = match adapter.task_kind {
        TaskKind::MultiLabel => Aggregate::MultiLabel {
            sample_averaged: aggregate_multilabel(&ml_samples, AveragingMode::SampleAveraged)?,
            micro: aggregate_multilabel(&ml_samples, AveragingMode::Micro)?,
        },
        TaskKind::MultiClass => Aggregate::MultiClass {
            accuracy: top1_accuracy(&mc_records)?,
        },
    };

    let report = EvalReport {
        run_config_digest: digest,
        dataset: adapter.name.clone(),
        task: adapter.task_kind,
        backend_identity: backend.identity(),
        n_samples: per_sample.len(),
        aggregate,
        parse_stats,
        backend_stats,
        per_sample,
    };

    if let Some(out_dir) = &config.output_dir {
        persist_run(out_dir, config, &adapter, &report, &outcomes)?;
    }
    Ok(report)
}

fn persist_run(
    out_dir: &Path,
    config: &RunConfig,
    adapter: &DatasetAdapter,
    report: &EvalReport,
    outcomes: &[RawOutcome],
) -> Result<(), BenchError> {
    let meta = RunMeta {
        run_config_digest: report.run_config_digest.clone(),
        dataset: adapter.name.clone(),
        task: adapter.task_kind,
        backend_identity: report.backend_identity.clone(),
        strategy_label: super::config::strategy_label(&config.strategy),
        modality_label: super::config::modality_set_label(&config.modalities),
        seed: config.seed,
        sample_limit: config.sample_limit,
        sample_order: outcomes.iter().map(|o| o.sample_id.clone()).collect(),
        backend_stats: report.backend_stats,
    };
    let mut meta_bytes = serde_json::to_vec_pretty(&meta).expect("meta serializes");
    meta_bytes.push(b'\n');
    write_file(&out_dir.join("run_meta.json"), &meta_bytes)?;

    for (outcome, record) in outcomes.iter().zip(&report.per_sample) {
        let dir = out_dir
            .join("samples")
            .join(sanitize_id(&outcome.sample_id));
        write_file(&dir.join("prompt.txt"), outcome.prompt_text.as_bytes())?;
        write_file(&dir.join("response.txt"), outcome.response_text.as_bytes())?;
        let mut record_bytes = serde_json::to_vec_pretty(record).expect("record serializes");
        record_bytes.push(b'\n');
        write_file(&dir.join("record.json"), &record_bytes)?;
    }

    emit_run_report(report, out_dir)?;
    Ok(())
}

/// Rebuilds a report from `run_meta.json` plus the per-sample `record.json`
/// artifacts, recomputing all aggregates.
pub fn rebuild_report(run_dir: &Path) -> Result<EvalReport, BenchError> {
    let meta_path = run_dir.join("run_meta.json");
    let meta_json = std::fs::read_to_string(&meta_path).map_err(|e| BenchError::Storage {
        path: meta_path.display().to_string(),
        detail: e.to_string(),
    })?;
    let meta: RunMeta =
        serde_json::from_str(&meta_json).map_err(|e| BenchError::Config(e.to_string()))?;

    let mut parse_stats = ParseStats::default();
    let mut per_sample = Vec::with_capacity(meta.sample_order.len());
    let mut ml_samples: Vec<MultiLabelSample> = Vec::new();
    let mut mc_records: Vec<(Option<String>, String)> = Vec::new();

    for sample_id in &meta.sample_order {
        let record_path = run_dir
            .join("samples")
            .join(sanitize_id(sample_id))
            .join("record.json");
        let record_json =
            std::fs::read_to_string(&record_path).map_err(|e| BenchError::Storage {
                path: record_path.display().to_string(),
                detail: e.to_string(),
            })?;
        let mut record: SampleRecord =
            serde_json::from_str(&record_json).map_err(|e| BenchError::Config(e.to_string()))?;
        parse_stats.record(record.parse_mode, record.unmatched.len());
        match meta.task {
            TaskKind::MultiLabel => {
                let pred = LabelSet::from_labels(record.predicted.iter().cloned());
                let truth = LabelSet::from_labels(record.truth.iter().cloned());
                let scored = score_sample(&pred, &truth)?;
                record.score = Some(scored.score);
                ml_samples.push(scored);
            }
            TaskKind::MultiClass => {
                let predicted = record.predicted.first().cloned();
                let truth = record.truth[0].clone();
                record.correct = Some(predicted.as_deref() == Some(truth.as_str()));
                mc_records.push((predicted, truth));
            }
        }
        per_sample.push(record);
    }

    let aggregate = match meta.task {
        TaskKind::MultiLabel => Aggregate::MultiLabel {
            sample_averaged: aggregate_multilabel(&ml_samples, AveragingMode::SampleAveraged)?,
            micro: aggregate_multilabel(&ml_samples, AveragingMode::Micro)?,
        },
        TaskKind::MultiClass => Aggregate::MultiClass {
            accuracy: top1_accuracy(&mc_records)?,
        },
    };

    Ok(EvalReport {
        run_config_digest: meta.run_config_digest,
        dataset: meta.dataset,
        task: meta.task,
        backend_identity: meta.backend_identity,
        n_samples: per_sample.len(),
        aggregate,
        parse_stats,
        backend_stats: meta.backend_stats,
        per_sample,
    })
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct AblationRowResult {
    pub strategy: String,
    pub modality: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub headline: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_config_digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Runs every matrix row sequentially (per-row parallelism comes from the
/// base config's worker count). A failing row is recorded and the remaining
/// rows continue.
pub fn run_ablation(matrix: &super::config::MatrixConfig) -> Vec<AblationRowResult> {
    let rows = matrix.effective_rows();
    let mut results = Vec::with_capacity(rows.len());
    for row in &rows {
        let strategy = super::config::strategy_label(&row.strategy);
        let modality = super::config::modality_set_label(&row.modalities);
        let mut config = matrix.base.clone();
        config.strategy = row.strategy;
        config.modalities = row.modalities.clone();
        if let Some(base_out) = &matrix.base.output_dir {
            let slug = format!(
                "{}__{}",
                sanitize_id(&strategy.to_lowercase().replace(' ', "_")),
                sanitize_id(&modality.to_lowercase().replace(' ', "_"))
            );
            config.output_dir = Some(base_out.join("rows").join(slug));
        }
        match run_eval(&config) {
            Ok(report) => results.push(AblationRowResult {
                strategy,
                modality,
                headline: Some(report.headline()),
                run_config_digest: Some(report.run_config_digest.clone()),
                error: None,
            }),
            Err(err) => results.push(AblationRowResult {
                strategy,
                modality,
                headline: None,
                run_config_digest: None,
                error: Some(err.to_string()),
            }),
        }
    }
    results
}
