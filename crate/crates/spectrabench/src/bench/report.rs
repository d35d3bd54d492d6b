//! Report emission: JSON for machines, a CSV summary row for spreadsheets,
//! and a plain-text table for humans. Emission is a pure function of the
//! report, so re-emitting unchanged results is byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use crate::metrics::{Aggregate, EvalReport};

use super::runner::AblationRowResult;
use super::BenchError;

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

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

/// One CSV summary row (plus header) per run.
pub fn run_csv(report: &EvalReport) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "run_config_digest",
            "dataset",
            "task",
            "backend",
            "n_samples",
            "f1_sample_averaged",
            "precision_sample_averaged",
            "recall_sample_averaged",
            "f1_micro",
            "precision_micro",
            "recall_micro",
            "accuracy",
            "parse_answer_line",
            "parse_full_scan",
            "parse_empty",
            "unmatched_tokens",
            "backend_requests",
            "backend_cached",
            "backend_failures",
        ])
        .expect("csv header");
    let (sa, micro, accuracy) = match &report.aggregate {
        Aggregate::MultiLabel {
            sample_averaged,
            micro,
        } => (Some(*sample_averaged), Some(*micro), None),
        Aggregate::MultiClass { accuracy } => (None, None, Some(*accuracy)),
    };
    let task = match report.task {
        crate::promptkit::TaskKind::MultiLabel => "multi-label",
        crate::promptkit::TaskKind::MultiClass => "multi-class",
    };
    writer
        .write_record([
            report.run_config_digest.clone(),
            report.dataset.clone(),
            task.to_string(),
            report.backend_identity.clone(),
            report.n_samples.to_string(),
            fmt_opt(sa.map(|t| t.f1)),
            fmt_opt(sa.map(|t| t.precision)),
            fmt_opt(sa.map(|t| t.recall)),
            fmt_opt(micro.map(|t| t.f1)),
            fmt_opt(micro.map(|t| t.precision)),
            fmt_opt(micro.map(|t| t.recall)),
            fmt_opt(accuracy),
            report.parse_stats.answer_line.to_string(),
            report.parse_stats.full_scan.to_string(),
            report.parse_stats.empty.to_string(),
            report.parse_stats.unmatched_tokens.to_string(),
            report.backend_stats.requests.to_string(),
            report
                .backend_stats
                .served_from_cache_or_fixture
                .to_string(),
            report.backend_stats.failures.to_string(),
        ])
        .expect("csv row");
    String::from_utf8(writer.into_inner().expect("csv flush")).expect("csv is utf8")
}

/// Human-readable per-run summary.
pub fn run_text(report: &EvalReport) -> String {
    let mut out = String::new();
    let task = match report.task {
        crate::promptkit::TaskKind::MultiLabel => "multi-label",
        crate::promptkit::TaskKind::MultiClass => "multi-class",
    };
    let _ = writeln!(out, "run {}", report.run_config_digest);
    let _ = writeln!(
        out,
        "dataset: {} ({task})   backend: {}",
        report.dataset, report.backend_identity
    );
    let _ = writeln!(out, "samples: {}", report.n_samples);
    match &report.aggregate {
        Aggregate::MultiLabel {
            sample_averaged,
            micro,
        } => {
            let _ = writeln!(
                out,
                "sample-averaged   F1 {:.3}   Precision {:.3}   Recall {:.3}",
                sample_averaged.f1, sample_averaged.precision, sample_averaged.recall
            );
            let _ = writeln!(
                out,
                "micro             F1 {:.3}   Precision {:.3}   Recall {:.3}",
                micro.f1, micro.precision, micro.recall
            );
        }
        Aggregate::MultiClass { accuracy } => {
            let _ = writeln!(
                out,
                "top-1 accuracy    {:.3} ({:.1}%)",
                accuracy,
                accuracy * 100.0
            );
        }
    }
    let p = &report.parse_stats;
    let _ = writeln!(
        out,
        "parse modes: answer-line {}, full-scan {}, empty {}; unmatched tokens {}",
        p.answer_line, p.full_scan, p.empty, p.unmatched_tokens
    );
    let b = &report.backend_stats;
    let _ = writeln!(
        out,
        "backend: requests {}, cache/fixture hits {}, failures {}",
        b.requests, b.served_from_cache_or_fixture, b.failures
    );
    out
}

/// Writes `report.json`, `report.csv`, and `report.txt` under `dir`.
pub fn emit_run_report(report: &EvalReport, dir: &Path) -> Result<(), BenchError> {
    write_file(&dir.join("report.json"), &report.to_json_bytes())?;
    write_file(&dir.join("report.csv"), run_csv(report).as_bytes())?;
    write_file(&dir.join("report.txt"), run_text(report).as_bytes())?;
    Ok(())
}

/// Comparison table over ablation rows, headline metric to 3 decimals.
pub fn matrix_text(rows: &[AblationRowResult]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<36} | {:<22} | F1",
        "Prompting method", "Input modality"
    );
    let _ = writeln!(out, "{:-<36}-+-{:-<22}-+------", "", "");
    for row in rows {
        let value = match (row.headline, &row.error) {
            (Some(headline), _) => format!("{headline:.3}"),
            (None, Some(error)) => format!("error: {error}"),
            (None, None) => "-".into(),
        };
        let _ = writeln!(
            out,
            "{:<36} | {:<22} | {}",
            row.strategy, row.modality, value
        );
    }
    out
}

pub fn matrix_csv(rows: &[AblationRowResult]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "strategy",
            "modality",
            "headline",
            "run_config_digest",
            "error",
        ])
        .expect("csv header");
    for row in rows {
        writer
            .write_record([
                row.strategy.clone(),
                row.modality.clone(),
                row.headline.map(|h| format!("{h:.6}")).unwrap_or_default(),
                row.run_config_digest.clone().unwrap_or_default(),
                row.error.clone().unwrap_or_default(),
            ])
            .expect("csv row");
    }
    String::from_utf8(writer.into_inner().expect("csv flush")).expect("csv is utf8")
}

/// Writes `matrix.json`, `matrix.csv`, and `matrix.txt` under `dir`.
pub fn emit_matrix(rows: &[AblationRowResult], dir: &Path) -> Result<(), BenchError> {
    let mut json = serde_json::to_vec_pretty(rows).expect("matrix serializes");
    json.push(b'\n');
    write_file(&dir.join("matrix.json"), &json)?;
    write_file(&dir.join("matrix.csv"), matrix_csv(rows).as_bytes())?;
    write_file(&dir.join("matrix.txt"), matrix_text(rows).as_bytes())?;
    Ok(())
}
