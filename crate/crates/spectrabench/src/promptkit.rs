//! Instruction assembly for the three prompting strategies.
//!
//! Prompts are built from editable text templates (`templates/` in this
//! crate) with `{{placeholder}}` markers. The baseline prompt carries the
//! Sentinel-2 band catalog and one descriptor line per supplied image;
//! the expansion variant appends per-class guides; the chain-of-thought
//! variant inserts the Propose/Verify/Conclude block between the input
//! descriptions and the class list.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::BandId;
use crate::spectral::PseudoImage;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("vocabulary has no classes")]
    EmptyVocabulary,
    #[error("no images supplied")]
    NoImages,
    #[error("class {0:?} has no expanded definition")]
    MissingDefinition(String),
    #[error("template placeholder {0:?} is not bound")]
    UnboundPlaceholder(String),
    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),
    #[error("template read failed at {path}: {reason}")]
    TemplateIo { path: String, reason: String },
}

// ---------------------------------------------------------------------------
// Band catalog
// ---------------------------------------------------------------------------

/// One catalog line: band name plus central wavelength and/or resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct BandCatalogEntry {
    pub band: BandId,
    pub name: &'static str,
    pub central_wavelength_nm: Option<f32>,
    pub resolution_m: u32,
}

impl BandCatalogEntry {
    /// Formats the entry the way it appears in prompts, e.g.
    /// `B05: Red Edge (704.1nm, 20m)` or `B02: Blue (10m)`.
    pub fn prompt_line(&self) -> String {
        match self.central_wavelength_nm {
            Some(wl) => format!(
                "{}: {} ({}nm, {}m)",
                self.band, self.name, wl, self.resolution_m
            ),
            None => format!("{}: {} ({}m)", self.band, self.name, self.resolution_m),
        }
    }
}

/// The twelve Sentinel-2 L2A bands in presentation order.
pub fn band_catalog() -> Vec<BandCatalogEntry> {
    use BandId::*;
    let entry = |band, name, wl, res| BandCatalogEntry {
        band,
        name,
        central_wavelength_nm: wl,
        resolution_m: res,
    };
    vec![
        entry(B02, "Blue", None, 10),
        entry(B03, "Green", None, 10),
        entry(B04, "Red", None, 10),
        entry(B05, "Red Edge", Some(704.1), 20),
        entry(B06, "Red Edge", Some(740.5), 20),
        entry(B07, "Red Edge", Some(782.8), 20),
        entry(B08, "NIR", None, 10),
        entry(B8A, "Narrow NIR", None, 20),
        entry(B01, "Coastal Aerosol", None, 60),
        entry(B09, "Water Vapor", None, 60),
        entry(B11, "SWIR", Some(1613.7), 20),
        entry(B12, "SWIR", Some(2202.4), 20),
    ]
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "multi-label")]
    MultiLabel,
    #[serde(rename = "multi-class")]
    MultiClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub definition: Option<String>,
}

/// Closed class vocabulary for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassVocabulary {
    #[serde(rename = "task")]
    pub task_kind: TaskKind,
    pub classes: Vec<ClassEntry>,
}

impl ClassVocabulary {
    pub fn new(task_kind: TaskKind, classes: Vec<ClassEntry>) -> Result<Self, PromptError> {
        let vocab = Self { task_kind, classes };
        vocab.validate()?;
        Ok(vocab)
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if self.classes.is_empty() {
            return Err(PromptError::EmptyVocabulary);
        }
        let mut seen = BTreeSet::new();
        for class in &self.classes {
            if class.name.trim().is_empty() {
                return Err(PromptError::InvalidVocabulary(
                    "class names must be non-empty".into(),
                ));
            }
            if !seen.insert(class.name.as_str()) {
                return Err(PromptError::InvalidVocabulary(format!(
                    "duplicate class name {:?}",
                    class.name
                )));
            }
        }
        Ok(())
    }

    pub fn from_json_str(json: &str) -> Result<Self, PromptError> {
        let vocab: ClassVocabulary = serde_json::from_str(json)
            .map_err(|e| PromptError::InvalidVocabulary(e.to_string()))?;
        vocab.validate()?;
        Ok(vocab)
    }

    pub fn from_file(path: &Path) -> Result<Self, PromptError> {
        let json = std::fs::read_to_string(path).map_err(|e| PromptError::TemplateIo {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json_str(&json)
    }

    pub fn class_names(&self) -> Vec<&str> {
        self.classes.iter().map(|c| c.name.as_str()).collect()
    }
}

// ---------------------------------------------------------------------------
// Strategy
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyVariant {
    Baseline,
    Expansion,
    Cot,
}

fn default_true() -> bool {
    true
}

/// Prompting strategy plus the ablation flags. Both flags default to on;
/// turning one off reproduces the "w/o band description" and "w/o
/// pseudo-image description" configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptStrategy {
    pub variant: StrategyVariant,
    #[serde(default = "default_true")]
    pub include_band_catalog: bool,
    #[serde(default = "default_true")]
    pub include_image_descriptors: bool,
    /// Compose the class guides into a chain-of-thought prompt. Off by
    /// default; the reported configurations keep the two strategies separate.
    #[serde(default)]
    pub with_expansion: bool,
}

impl PromptStrategy {
    pub fn baseline() -> Self {
        Self {
            variant: StrategyVariant::Baseline,
            include_band_catalog: true,
            include_image_descriptors: true,
            with_expansion: false,
        }
    }

    pub fn expansion() -> Self {
        Self {
            variant: StrategyVariant::Expansion,
            ..Self::baseline()
        }
    }

    pub fn cot() -> Self {
        Self {
            variant: StrategyVariant::Cot,
            ..Self::baseline()
        }
    }
}

/// Ordered pseudo-images plus the assembled instruction text.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptBundle {
    pub images: Vec<PseudoImage>,
    pub instruction_text: String,
    pub strategy: PromptStrategy,
}

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

/// The shipped template text, overridable from a directory of the same
/// file names (`baseline.txt`, `cot_block.txt`).
#[derive(Debug, Clone)]
pub struct TemplateSet {
    pub baseline: String,
    pub cot_block: String,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        Self {
            baseline: include_str!("../templates/baseline.txt").to_string(),
            cot_block: include_str!("../templates/cot_block.txt").to_string(),
        }
    }

    pub fn from_dir(dir: &Path) -> Result<Self, PromptError> {
        let read = |name: &str| -> Result<String, PromptError> {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|e| PromptError::TemplateIo {
                path: path.display().to_string(),
                reason: e.to_string(),
            })
        };
        Ok(Self {
            baseline: read("baseline.txt")?,
            cot_block: read("cot_block.txt")?,
        })
    }
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

/// Substitutes every `{{name}}` marker from `bindings`. A placeholder with
/// no binding is a hard error; it is never emitted literally.
pub fn render_template(template: &str, bindings: &[(&str, &str)]) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find("}}")
            .ok_or_else(|| PromptError::UnboundPlaceholder(clip(after)))?;
        let name = &after[..end];
        let value = bindings
            .iter()
            .find(|(k, _)| *k == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| PromptError::UnboundPlaceholder(name.to_string()))?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

fn clip(s: &str) -> String {
    s.chars().take(24).collect()
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

fn band_catalog_block() -> String {
    let mut block = String::from("The Sentinel-2 band composition:\n");
    for entry in band_catalog() {
        block.push_str(&entry.prompt_line());
        block.push('\n');
    }
    block.push('\n');
    block
}

fn image_descriptor_block(images: &[PseudoImage]) -> String {
    let mut block = String::from("The provided images are:\n");
    for (i, image) in images.iter().enumerate() {
        let _ = writeln!(block, "Image {} - {}", i + 1, image.descriptor);
    }
    block.push('\n');
    block
}

fn class_list_block(vocab: &ClassVocabulary) -> String {
    let mut block = String::from("The possible classes are:\n");
    for class in &vocab.classes {
        let _ = writeln!(block, "- {}", class.name);
    }
    block.push('\n');
    block
}

fn class_guides_block(vocab: &ClassVocabulary) -> Result<String, PromptError> {
    let mut block = String::from("Class guides:\n");
    for (i, class) in vocab.classes.iter().enumerate() {
        let definition = class
            .definition
            .as_deref()
            .filter(|d| !d.trim().is_empty())
            .ok_or_else(|| PromptError::MissingDefinition(class.name.clone()))?;
        let _ = writeln!(block, "({}) {}: {}", i + 1, class.name, definition);
    }
    block.push('\n');
    Ok(block)
}

fn answer_blocks(task: TaskKind) -> (&'static str, &'static str) {
    match task {
        TaskKind::MultiLabel => (
            "More than one class is possible as an output; do not limit how many classes you select.\n",
            "Finish with your final answer on the last line, in exactly this format:\nANSWER: <class>; <class>; ...\n",
        ),
        TaskKind::MultiClass => (
            "Select exactly one class.\n",
            "Finish with your final answer on the last line, in exactly this format:\nANSWER: <class>\n",
        ),
    }
}

fn assemble(
    images: Vec<PseudoImage>,
    vocab: &ClassVocabulary,
    strategy: PromptStrategy,
    templates: &TemplateSet,
) -> Result<PromptBundle, PromptError> {
    if images.is_empty() {
        return Err(PromptError::NoImages);
    }
    vocab.validate()?;

    let mut images = images;
    images.sort_by_key(|img| img.kind);

    let include_guides = matches!(strategy.variant, StrategyVariant::Expansion)
        || (matches!(strategy.variant, StrategyVariant::Cot) && strategy.with_expansion);

    let image_count = images.len().to_string();
    let band_catalog = if strategy.include_band_catalog {
        band_catalog_block()
    } else {
        String::new()
    };
    let image_descriptors = if strategy.include_image_descriptors {
        image_descriptor_block(&images)
    } else {
        String::new()
    };
    let reasoning = if matches!(strategy.variant, StrategyVariant::Cot) {
        let block = render_template(&templates.cot_block, &[("image_count", &image_count)])?;
        format!("{}\n", block.trim_end())
    } else {
        String::new()
    };
    let class_list = class_list_block(vocab);
    let class_guides = if include_guides {
        class_guides_block(vocab)?
    } else {
        String::new()
    };
    let (multi_answer, answer_directive) = answer_blocks(vocab.task_kind);

    let instruction_text = render_template(
        &templates.baseline,
        &[
            ("image_count", &image_count),
            ("band_catalog", &band_catalog),
            ("image_descriptors", &image_descriptors),
            ("reasoning", &reasoning),
            ("class_list", &class_list),
            ("class_guides", &class_guides),
            ("multi_answer", multi_answer),
            ("answer_directive", answer_directive),
        ],
    )?;

    Ok(PromptBundle {
        images,
        instruction_text,
        strategy,
    })
}

/// Baseline informative prompt: band catalog, per-image descriptors, class
/// list, and the machine-parsable answer directive.
pub fn build_baseline_prompt(
    images: Vec<PseudoImage>,
    vocab: &ClassVocabulary,
    strategy: PromptStrategy,
) -> Result<PromptBundle, PromptError> {
    build_prompt_with_templates(images, vocab, strategy, &TemplateSet::builtin())
}

/// Baseline plus a numbered per-class guide block. Every class must carry an
/// expanded definition.
pub fn build_expansion_prompt(
    images: Vec<PseudoImage>,
    vocab: &ClassVocabulary,
    strategy: PromptStrategy,
) -> Result<PromptBundle, PromptError> {
    let strategy = PromptStrategy {
        variant: StrategyVariant::Expansion,
        ..strategy
    };
    build_prompt_with_templates(images, vocab, strategy, &TemplateSet::builtin())
}

/// Baseline (or expansion, when composed) plus the Propose/Verify/Conclude
/// reasoning block, inserted after the input descriptions.
pub fn build_cot_prompt(
    images: Vec<PseudoImage>,
    vocab: &ClassVocabulary,
    strategy: PromptStrategy,
) -> Result<PromptBundle, PromptError> {
    let strategy = PromptStrategy {
        variant: StrategyVariant::Cot,
        ..strategy
    };
    build_prompt_with_templates(images, vocab, strategy, &TemplateSet::builtin())
}

/// Builds the prompt for whatever variant `strategy` selects.
pub fn build_prompt(
    images: Vec<PseudoImage>,
    vocab: &ClassVocabulary,
    strategy: PromptStrategy,
) -> Result<PromptBundle, PromptError> {
    build_prompt_with_templates(images, vocab, strategy, &TemplateSet::builtin())
}

pub fn build_prompt_with_templates(
    images: Vec<PseudoImage>,
    vocab: &ClassVocabulary,
    strategy: PromptStrategy,
    templates: &TemplateSet,
) -> Result<PromptBundle, PromptError> {
    assemble(images, vocab, strategy, templates)
}
