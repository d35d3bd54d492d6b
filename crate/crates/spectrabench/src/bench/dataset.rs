//! Dataset adapters over an index CSV.
//!
//! Adapters never hard-code archive layouts: the index file
//! (`sample_id,manifest,labels`) points at scene manifests and carries
//! `;`-separated ground-truth labels. An optional class-mapping table
//! rewrites source labels onto the run vocabulary (the 43-to-19 table for
//! BigEarthNet ships as a data file); samples whose labels all map to
//! dropped classes are excluded, mirroring the 19-class benchmark protocol.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::parse::AliasTable;
use crate::promptkit::{ClassVocabulary, TaskKind};

use super::config::DatasetConfig;
use super::BenchError;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRef {
    pub sample_id: String,
    pub manifest_path: PathBuf,
    pub truth: Vec<String>,
}

/// Source-label to class mapping; `null` targets drop the source label.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(transparent)]
pub struct ClassMapping {
    pub map: BTreeMap<String, Option<String>>,
}

impl ClassMapping {
    pub fn from_json_str(json: &str) -> Result<Self, BenchError> {
        serde_json::from_str(json).map_err(|e| BenchError::Dataset(format!("class mapping: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self, BenchError> {
        let json = std::fs::read_to_string(path).map_err(|e| BenchError::Storage {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        Self::from_json_str(&json)
    }

    /// Targets that at least one source label maps onto.
    pub fn reachable_targets(&self) -> BTreeSet<&str> {
        self.map.values().filter_map(|t| t.as_deref()).collect()
    }

    /// Every mapping target must be a vocabulary class, and every vocabulary
    /// class must be reachable from some source label.
    pub fn verify_against(&self, vocab: &ClassVocabulary) -> Result<(), BenchError> {
        let classes: BTreeSet<&str> = vocab.classes.iter().map(|c| c.name.as_str()).collect();
        for (source, target) in &self.map {
            if let Some(target) = target {
                if !classes.contains(target.as_str()) {
                    return Err(BenchError::Dataset(format!(
                        "mapping target {target:?} (from {source:?}) is not a vocabulary class"
                    )));
                }
            }
        }
        let reachable = self.reachable_targets();
        for class in &classes {
            if !reachable.contains(class) {
                return Err(BenchError::Dataset(format!(
                    "vocabulary class {class:?} is unreachable from the mapping"
                )));
            }
        }
        Ok(())
    }

    /// Maps a label list, dropping null-target labels and deduplicating while
    /// preserving order. Unknown source labels are malformed ground truth.
    pub fn apply(&self, labels: &[String]) -> Result<Vec<String>, BenchError> {
        let mut out: Vec<String> = Vec::with_capacity(labels.len());
        for label in labels {
            match self.map.get(label) {
                Some(Some(target)) => {
                    if !out.iter().any(|l| l == target) {
                        out.push(target.clone());
                    }
                }
                Some(None) => {}
                None => {
                    return Err(BenchError::Dataset(format!(
                        "ground-truth label {label:?} is not in the class mapping"
                    )))
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Deserialize)]
struct IndexRow {
    sample_id: String,
    manifest: String,
    labels: String,
}

/// One parsed index row: raw labels, before any class mapping.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub sample_id: String,
    pub manifest: String,
    pub labels: Vec<String>,
}

/// Parses the `sample_id,manifest,labels` index CSV. Labels are
/// `;`-separated; empty label lists and duplicate ids are rejected.
pub fn parse_index_csv(bytes: &[u8]) -> Result<Vec<IndexEntry>, BenchError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut entries = Vec::new();
    let mut seen_ids = BTreeSet::new();
    for row in reader.deserialize::<IndexRow>() {
        let row = row.map_err(|e| BenchError::Dataset(format!("index: {e}")))?;
        if row.sample_id.is_empty() {
            return Err(BenchError::Dataset("index row with empty sample_id".into()));
        }
        if !seen_ids.insert(row.sample_id.clone()) {
            return Err(BenchError::Dataset(format!(
                "duplicate sample_id {:?} in index",
                row.sample_id
            )));
        }
        let labels: Vec<String> = row
            .labels
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        if labels.is_empty() {
            return Err(BenchError::Dataset(format!(
                "sample {:?} has no ground-truth labels",
                row.sample_id
            )));
        }
        entries.push(IndexEntry {
            sample_id: row.sample_id,
            manifest: row.manifest,
            labels,
        });
    }
    Ok(entries)
}

#[derive(Debug)]
pub struct DatasetAdapter {
    pub name: String,
    pub task_kind: TaskKind,
    pub vocabulary: ClassVocabulary,
    pub aliases: AliasTable,
    pub samples: Vec<SampleRef>,
    /// Samples excluded because every label mapped to a dropped class.
    pub dropped_samples: usize,
}

impl DatasetAdapter {
    pub fn load(config: &DatasetConfig) -> Result<Self, BenchError> {
        let vocabulary = ClassVocabulary::from_file(&config.vocabulary)
            .map_err(|e| BenchError::Dataset(format!("vocabulary: {e}")))?;
        let mapping = match &config.class_mapping {
            Some(path) => {
                let mapping = ClassMapping::from_file(path)?;
                mapping.verify_against(&vocabulary)?;
                Some(mapping)
            }
            None => None,
        };
        let aliases = match &config.aliases {
            Some(path) => AliasTable::from_file(path).map_err(|e| BenchError::Storage {
                path: path.display().to_string(),
                detail: e.to_string(),
            })?,
            None => AliasTable::empty(),
        };

        let class_names: BTreeSet<&str> =
            vocabulary.classes.iter().map(|c| c.name.as_str()).collect();
        let base = config.index.parent().unwrap_or_else(|| Path::new("."));
        let bytes = std::fs::read(&config.index).map_err(|e| BenchError::Storage {
            path: config.index.display().to_string(),
            detail: e.to_string(),
        })?;
        let entries = parse_index_csv(&bytes)
            .map_err(|e| BenchError::Dataset(format!("{}: {e}", config.index.display())))?;

        let mut samples = Vec::new();
        let mut dropped_samples = 0usize;
        for entry in entries {
            let truth = match &mapping {
                Some(mapping) => mapping.apply(&entry.labels)?,
                None => entry.labels,
            };
            if truth.is_empty() {
                dropped_samples += 1;
                continue;
            }
            for label in &truth {
                if !class_names.contains(label.as_str()) {
                    return Err(BenchError::Dataset(format!(
                        "sample {:?} has label {label:?} outside the vocabulary",
                        entry.sample_id
                    )));
                }
            }
            let manifest = PathBuf::from(&entry.manifest);
            let manifest_path = if manifest.is_absolute() {
                manifest
            } else {
                base.join(manifest)
            };
            samples.push(SampleRef {
                sample_id: entry.sample_id,
                manifest_path,
                truth,
            });
        }

        Ok(DatasetAdapter {
            name: config.name.clone(),
            task_kind: vocabulary.task_kind,
            vocabulary,
            aliases,
            samples,
            dropped_samples,
        })
    }
}
