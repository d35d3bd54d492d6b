//! Extraction of class labels from raw model text.
//!
//! The primary path looks for the last `ANSWER:` line and splits it on
//! semicolons; when no such line exists the full text is scanned for
//! vocabulary names, longest name first so that a longer class never leaks
//! its substring sibling. Every input yields an outcome; failures surface
//! as an `Empty` parse mode or as unmatched tokens, never as errors.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::promptkit::ClassVocabulary;

/// Labels recognized against the closed vocabulary, in the order they were
/// extracted, plus the raw answer tokens that matched nothing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    pub labels: Vec<String>,
    pub unmatched: Vec<String>,
}

impl LabelSet {
    pub fn from_labels<I: IntoIterator<Item = S>, S: Into<String>>(labels: I) -> Self {
        let mut set = LabelSet::default();
        for label in labels {
            set.push_label(label.into());
        }
        set
    }

    fn push_label(&mut self, label: String) {
        if !self.labels.iter().any(|l| l == &label) {
            self.labels.push(label);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn as_set(&self) -> BTreeSet<&str> {
        self.labels.iter().map(|s| s.as_str()).collect()
    }

    /// First extracted label; the top-1 prediction for multi-class tasks.
    pub fn primary(&self) -> Option<&str> {
        self.labels.first().map(|s| s.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParseMode {
    AnswerLine,
    FullScan,
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub label_set: LabelSet,
    pub parse_mode: ParseMode,
}

/// Optional surface-form to canonical-name mapping, e.g. benchmark tokens
/// like `SeaLake` onto the vocabulary's `Sea lake`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AliasTable {
    pub map: BTreeMap<String, String>,
}

impl AliasTable {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_json_str(json: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(json)
    }

    pub fn from_file(path: &Path) -> std::io::Result<Self> {
        let json = std::fs::read_to_string(path)?;
        Self::from_json_str(&json).map_err(std::io::Error::other)
    }
}

fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for ch in s.trim().chars() {
        if ch.is_whitespace() {
            pending_space = true;
            continue;
        }
        if pending_space && !out.is_empty() {
            out.push(' ');
        }
        pending_space = false;
        for lower in ch.to_lowercase() {
            out.push(lower);
        }
    }
    out
}

/// Parser bound to one vocabulary, with optional aliases and chain-of-thought
/// awareness (scan after the final "Conclude" marker when no ANSWER line is
/// present).
pub struct ResponseParser {
    /// normalized surface form -> canonical class name
    surfaces: Vec<(String, String)>,
    exact: BTreeMap<String, String>,
    cot_aware: bool,
}

impl ResponseParser {
    pub fn new(vocab: &ClassVocabulary) -> Self {
        Self::with_aliases(vocab, &AliasTable::empty())
    }

    pub fn with_aliases(vocab: &ClassVocabulary, aliases: &AliasTable) -> Self {
        let canonical: BTreeSet<&str> = vocab.classes.iter().map(|c| c.name.as_str()).collect();
        let mut exact = BTreeMap::new();
        for name in &canonical {
            exact.insert(normalize(name), name.to_string());
        }
        for (surface, target) in &aliases.map {
            // Aliases must land inside the closed vocabulary; anything else
            // would break vocabulary closure downstream.
            if canonical.contains(target.as_str()) {
                exact.insert(normalize(surface), target.clone());
            }
        }
        let mut surfaces: Vec<(String, String)> =
            exact.iter().map(|(s, c)| (s.clone(), c.clone())).collect();
        surfaces.sort_by(|a, b| {
            b.0.chars()
                .count()
                .cmp(&a.0.chars().count())
                .then_with(|| a.0.cmp(&b.0))
        });
        Self {
            surfaces,
            exact,
            cot_aware: false,
        }
    }

    /// When set, FullScan on a response with a "Conclude" marker only looks at
    /// the text after the final marker, so Propose-step hypotheses are not
    /// harvested as answers.
    pub fn cot_aware(mut self, on: bool) -> Self {
        self.cot_aware = on;
        self
    }

    pub fn parse(&self, text: &str) -> ParseOutcome {
        if text.trim().is_empty() {
            return ParseOutcome {
                label_set: LabelSet::default(),
                parse_mode: ParseMode::Empty,
            };
        }
        if let Some(remainder) = last_answer_line(text) {
            let mut set = LabelSet::default();
            for raw in remainder.split(';') {
                let token = raw
                    .trim()
                    .trim_matches(|c| c == '*' || c == '"' || c == '.');
                let token = token.trim();
                if token.is_empty() {
                    continue;
                }
                match self.exact.get(&normalize(token)) {
                    Some(canonical) => set.push_label(canonical.clone()),
                    None => set.unmatched.push(token.to_string()),
                }
            }
            return ParseOutcome {
                label_set: set,
                parse_mode: ParseMode::AnswerLine,
            };
        }
        ParseOutcome {
            label_set: self.full_scan(text),
            parse_mode: ParseMode::FullScan,
        }
    }

    fn full_scan(&self, text: &str) -> LabelSet {
        let lowered = text.to_lowercase();
        let region = if self.cot_aware {
            match lowered.rfind("conclude") {
                Some(pos) => &lowered[pos + "conclude".len()..],
                None => lowered.as_str(),
            }
        } else {
            lowered.as_str()
        };
        let mut haystack: Vec<char> = Vec::with_capacity(region.len());
        let mut pending_space = false;
        for ch in region.chars() {
            if ch.is_whitespace() {
                pending_space = true;
                continue;
            }
            if pending_space && !haystack.is_empty() {
                haystack.push(' ');
            }
            pending_space = false;
            haystack.push(ch);
        }

        let mut set = LabelSet::default();
        for (surface, canonical) in &self.surfaces {
            let needle: Vec<char> = surface.chars().collect();
            if needle.is_empty() {
                continue;
            }
            let mut found = false;
            let mut i = 0;
            while i + needle.len() <= haystack.len() {
                if haystack[i..i + needle.len()] == needle[..]
                    && boundary_ok(&haystack, i, needle.len())
                {
                    found = true;
                    for slot in &mut haystack[i..i + needle.len()] {
                        *slot = '\u{0}';
                    }
                    i += needle.len();
                } else {
                    i += 1;
                }
            }
            if found {
                set.push_label(canonical.clone());
            }
        }
        set
    }
}

fn boundary_ok(haystack: &[char], start: usize, len: usize) -> bool {
    let before_ok = start == 0 || !haystack[start - 1].is_alphanumeric();
    let end = start + len;
    let after_ok = end == haystack.len() || !haystack[end].is_alphanumeric();
    before_ok && after_ok
}

/// Finds the LAST line carrying an `ANSWER:` marker and returns the text
/// after the colon. Tolerates leading markdown decoration and any casing.
fn last_answer_line(text: &str) -> Option<&str> {
    let mut result = None;
    for line in text.lines() {
        let stripped = line.trim_start_matches(|c: char| {
            c.is_whitespace() || c == '*' || c == '#' || c == '-' || c == '>'
        });
        let lower = stripped.to_lowercase();
        if let Some(rest) = lower.strip_prefix("answer") {
            let rest = rest.trim_start();
            if rest.starts_with(':') {
                // Slice the original line at the first ':' so token casing
                // is preserved for unmatched diagnostics.
                if let Some(colon) = stripped.find(':') {
                    result = Some(&stripped[colon + 1..]);
                }
            }
        }
    }
    result
}

/// Parses with no aliases and no chain-of-thought awareness.
pub fn parse_response(text: &str, vocab: &ClassVocabulary) -> ParseOutcome {
    ResponseParser::new(vocab).parse(text)
}
