//! Multi-label precision/recall/F1 and multi-class top-1 accuracy.
//!
//! Two multi-label aggregations are first-class: sample-averaged
//! (example-based means of per-sample scores, the default) and micro
//! (pooled intersection counts). Reports carry both side by side.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parse::{LabelSet, ParseMode};
use crate::promptkit::TaskKind;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("ground-truth label set is empty")]
    EmptyTruth,
    #[error("no samples in run")]
    EmptyRun,
}

/// Per-sample precision/recall/F1, all in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Raw per-sample tallies, the inputs to micro averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub intersection: usize,
    pub predicted: usize,
    pub truth: usize,
}

pub fn sample_counts(pred: &LabelSet, truth: &LabelSet) -> SampleCounts {
    let truth_set = truth.as_set();
    let pred_set = pred.as_set();
    let intersection = pred_set.intersection(&truth_set).count();
    SampleCounts {
        intersection,
        predicted: pred_set.len(),
        truth: truth_set.len(),
    }
}

fn f1_of(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

pub fn score_from_counts(counts: SampleCounts) -> Result<SampleScore, MetricsError> {
    if counts.truth == 0 {
        return Err(MetricsError::EmptyTruth);
    }
    let p = if counts.predicted == 0 {
        0.0
    } else {
        counts.intersection as f64 / counts.predicted as f64
    };
    let r = counts.intersection as f64 / counts.truth as f64;
    Ok(SampleScore {
        precision: p,
        recall: r,
        f1: f1_of(p, r),
    })
}

/// Example-based precision/recall/F1 for one sample. The ground truth must be
/// non-empty; an empty prediction scores zero.
pub fn sample_prf(pred: &LabelSet, truth: &LabelSet) -> Result<SampleScore, MetricsError> {
    score_from_counts(sample_counts(pred, truth))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateTriple {
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AveragingMode {
    SampleAveraged,
    Micro,
}

/// Arithmetic means of the per-sample scores.
pub fn aggregate_sample_averaged(scores: &[SampleScore]) -> Result<AggregateTriple, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyRun);
    }
    let n = scores.len() as f64;
    let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
    for s in scores {
        p += s.precision;
        r += s.recall;
        f += s.f1;
    }
    Ok(AggregateTriple {
        f1: f / n,
        precision: p / n,
        recall: r / n,
    })
}

/// Precision/recall from pooled counts, F1 from the pooled pair.
pub fn aggregate_micro(counts: &[SampleCounts]) -> Result<AggregateTriple, MetricsError> {
    if counts.is_empty() {
        return Err(MetricsError::EmptyRun);
    }
    let inter: usize = counts.iter().map(|c| c.intersection).sum();
    let pred: usize = counts.iter().map(|c| c.predicted).sum();
    let truth: usize = counts.iter().map(|c| c.truth).sum();
    let p = if pred == 0 {
        0.0
    } else {
        inter as f64 / pred as f64
    };
    let r = if truth == 0 {
        0.0
    } else {
        inter as f64 / truth as f64
    };
    Ok(AggregateTriple {
        f1: f1_of(p, r),
        precision: p,
        recall: r,
    })
}

/// One scored multi-label sample: the per-sample triple plus its raw tallies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiLabelSample {
    pub score: SampleScore,
    pub counts: SampleCounts,
}

pub fn score_sample(pred: &LabelSet, truth: &LabelSet) -> Result<MultiLabelSample, MetricsError> {
    let counts = sample_counts(pred, truth);
    Ok(MultiLabelSample {
        score: score_from_counts(counts)?,
        counts,
    })
}

pub fn aggregate_multilabel(
    samples: &[MultiLabelSample],
    mode: AveragingMode,
) -> Result<AggregateTriple, MetricsError> {
    match mode {
        AveragingMode::SampleAveraged => {
            let scores: Vec<SampleScore> = samples.iter().map(|s| s.score).collect();
            aggregate_sample_averaged(&scores)
        }
        AveragingMode::Micro => {
            let counts: Vec<SampleCounts> = samples.iter().map(|s| s.counts).collect();
            aggregate_micro(&counts)
        }
    }
}

/// Fraction of records where the prediction equals the true class. Parse
/// failures (`None`) count as incorrect.
pub fn top1_accuracy(records: &[(Option<String>, String)]) -> Result<f64, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::EmptyRun);
    }
    let correct = records
        .iter()
        .filter(|(pred, truth)| pred.as_deref() == Some(truth.as_str()))
        .count();
    Ok(correct as f64 / records.len() as f64)
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Aggregate block of an [`EvalReport`]; multi-label runs report both
/// averaging modes side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Aggregate {
    MultiLabel {
        sample_averaged: AggregateTriple,
        micro: AggregateTriple,
    },
    MultiClass {
        accuracy: f64,
    },
}

/// Parse-mode and unmatched-token tallies across a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseStats {
    pub answer_line: usize,
    pub full_scan: usize,
    pub empty: usize,
    pub unmatched_tokens: usize,
}

impl ParseStats {
    pub fn record(&mut self, mode: ParseMode, unmatched: usize) {
        match mode {
            ParseMode::AnswerLine => self.answer_line += 1,
            ParseMode::FullScan => self.full_scan += 1,
            ParseMode::Empty => self.empty += 1,
        }
        self.unmatched_tokens += unmatched;
    }
}

/// Backend traffic tallies for a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendStats {
    pub requests: usize,
    pub served_from_cache_or_fixture: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub predicted: Vec<String>,
    pub truth: Vec<String>,
    pub parse_mode: ParseMode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unmatched: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<SampleScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Per-run evaluation report: aggregates, per-sample outcomes, and tallies.
/// Contains no wall-clock values, so replayed runs serialize byte-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub run_config_digest: String,
    pub dataset: String,
    pub task: TaskKind,
    pub backend_identity: String,
    pub n_samples: usize,
    pub aggregate: Aggregate,
    pub parse_stats: ParseStats,
    pub backend_stats: BackendStats,
    pub per_sample: Vec<SampleRecord>,
}

impl EvalReport {
    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("report serializes");
        bytes.push(b'\n');
        bytes
    }

    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }

    /// Headline metric for comparison tables: sample-averaged F1 for
    /// multi-label runs, accuracy for multi-class runs.
    pub fn headline(&self) -> f64 {
        match &self.aggregate {
            Aggregate::MultiLabel {
                sample_averaged, ..
            } => sample_averaged.f1,
            Aggregate::MultiClass { accuracy } => *accuracy,
        }
    }
}
