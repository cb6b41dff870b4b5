//! Vocabulary configuration for the synthetic triple generator.
//!
//! The config lives in a plain-text file of `key: value` lines. List
//! values are comma-separated; `group` and `template *` keys repeat, one
//! line per entry. `#` starts a comment.
//!
//! ```text
//! objects: boy, girl, tree
//! attributes: red, green
//! relations: holding, near
//! group: red, green
//! template insert: show me **
//! template delete: remove **
//! template substitute: change ** to @@
//! ```
//!
//! `**` is the slot for the node being inserted/deleted (or the old label
//! for a substitution) and `@@` is the slot for a substitution's new label.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::graph::is_valid_label;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("{0}")]
    Io(String),
    #[error("line {0}: {1}")]
    Parse(usize, String),
    #[error("{0}")]
    Invalid(String),
}

/// Word lists, substitution groups, and query templates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VocabConfig {
    pub objects: Vec<String>,
    pub attributes: Vec<String>,
    pub relations: Vec<String>,
    /// Sets of mutually substitutable labels. Disjoint.
    pub substitution_groups: Vec<Vec<String>>,
    pub insert_templates: Vec<String>,
    pub delete_templates: Vec<String>,
    pub substitute_templates: Vec<String>,
}

const DEFAULT_VOCAB: &str = "\
# Built-in vocabulary for the synthetic generator.
objects: boy, girl, man, woman, dog, cat, bird, horse, tree, bridge, river, road, house, car, boat, building, field, lake, park, beach, school, plane, train, garden, tower, pond, hill, forest, island, church, market, farm, harbor, station, wall, fence, flower, grass
attributes: red, green, blue, gray, white, black, yellow, brown, big, small, tall, short, long, wide, old, new, young, bright, dark, clean, round, quiet, busy, empty, wooden, stone
relations: holding, near, on, in, above, below, beside, behind, under, over, along, across, inside, outside, facing, crossing
group: red, green, blue, gray, white, black, yellow, brown
group: big, small, tall, short, long, wide
group: old, new, young
group: boy, girl, man, woman
group: dog, cat, bird, horse
group: river, lake, pond
group: on, in, above, below, under, over, beside, behind
template insert: show me **
template insert: i want ** in the picture
template insert: please add **
template insert: i would like to see **
template delete: i do not want **
template delete: remove **
template delete: no more **
template substitute: i prefer @@ to ** , modify ** to @@ .
template substitute: change ** to @@
template substitute: replace ** with @@
";

impl VocabConfig {
    /// The built-in vocabulary (about a hundred distinct tokens).
    pub fn builtin() -> Self {
        Self::parse(DEFAULT_VOCAB).expect("built-in vocab must parse")
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, VocabError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| VocabError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, VocabError> {
        let mut cfg = VocabConfig {
            objects: Vec::new(),
            attributes: Vec::new(),
            relations: Vec::new(),
            substitution_groups: Vec::new(),
            insert_templates: Vec::new(),
            delete_templates: Vec::new(),
            substitute_templates: Vec::new(),
        };
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = idx + 1;
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| VocabError::Parse(lineno, "expected `key: value`".into()))?;
            let value = value.trim();
            let list = || -> Vec<String> {
                value
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            };
            match key.trim() {
                "objects" => cfg.objects.extend(list()),
                "attributes" => cfg.attributes.extend(list()),
                "relations" => cfg.relations.extend(list()),
                "group" => cfg.substitution_groups.push(list()),
                "template insert" => cfg.insert_templates.push(value.to_string()),
                "template delete" => cfg.delete_templates.push(value.to_string()),
                "template substitute" => cfg.substitute_templates.push(value.to_string()),
                other => {
                    return Err(VocabError::Parse(lineno, format!("unknown key {other:?}")));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), VocabError> {
        let invalid = |what: &str, label: &str| {
            VocabError::Invalid(format!("{what} {label:?} is not a valid node label"))
        };
        for (what, labels) in [
            ("object", &self.objects),
            ("attribute", &self.attributes),
            ("relation", &self.relations),
        ] {
            if labels.is_empty() {
                return Err(VocabError::Invalid(format!("no {what} labels configured")));
            }
            for l in labels {
                if !is_valid_label(l) {
                    return Err(invalid(what, l));
                }
            }
        }
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        for group in &self.substitution_groups {
            for member in group {
                if !is_valid_label(member) {
                    return Err(invalid("group member", member));
                }
                if !seen.insert(member) {
                    return Err(VocabError::Invalid(format!(
                        "substitution groups must be disjoint; {member:?} repeats"
                    )));
                }
            }
        }
        for (what, templates, slots) in [
            ("insert", &self.insert_templates, &["**"][..]),
            ("delete", &self.delete_templates, &["**"][..]),
            ("substitute", &self.substitute_templates, &["**", "@@"][..]),
        ] {
            if templates.is_empty() {
                return Err(VocabError::Invalid(format!("no {what} templates configured")));
            }
            for t in templates {
                for slot in slots {
                    if !t.contains(slot) {
                        return Err(VocabError::Invalid(format!(
                            "{what} template {t:?} is missing the {slot} placeholder"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// The substitution group containing `label`, if any.
    pub fn group_of(&self, label: &str) -> Option<&[String]> {
        self.substitution_groups
            .iter()
            .find(|g| g.iter().any(|m| m == label))
            .map(|g| g.as_slice())
    }

    /// Renders back to the file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let join = |items: &[String]| items.join(", ");
        let _ = writeln!(out, "objects: {}", join(&self.objects));
        let _ = writeln!(out, "attributes: {}", join(&self.attributes));
        let _ = writeln!(out, "relations: {}", join(&self.relations));
        for g in &self.substitution_groups {
            let _ = writeln!(out, "group: {}", join(g));
        }
        for t in &self.insert_templates {
            let _ = writeln!(out, "template insert: {t}");
        }
        for t in &self.delete_templates {
            let _ = writeln!(out, "template delete: {t}");
        }
        for t in &self.substitute_templates {
            let _ = writeln!(out, "template substitute: {t}");
        }
        out
    }

    /// Every distinct token the generator can emit: labels plus template
    /// words (placeholders excluded).
    pub fn distinct_tokens(&self) -> BTreeSet<String> {
        let mut tokens: BTreeSet<String> = BTreeSet::new();
        for l in self
            .objects
            .iter()
            .chain(&self.attributes)
            .chain(&self.relations)
        {
            tokens.insert(l.clone());
        }
        for t in self
            .insert_templates
            .iter()
            .chain(&self.delete_templates)
            .chain(&self.substitute_templates)
        {
            for w in t.split_whitespace() {
                if w != "**" && w != "@@" {
                    tokens.insert(w.to_string());
                }
            }
        }
        tokens
    }
}
