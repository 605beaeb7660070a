//! Deterministic offline extractor backed by a surface-form lexicon.

use std::collections::{BTreeSet, HashSet};
use std::io::BufRead;

use thiserror::Error;

use crate::corpus::{split_sentences, Excerpt, WordMatcher};
use crate::schema::{EntityType, RelationType, SchemaError, Triple};

#[derive(Debug, Error)]
pub enum GazetteerError {
    #[error("line {line}: expected `surface<TAB>entity_type<TAB>context_label`")]
    Malformed { line: usize },
    #[error("line {line}: {source}")]
    Type {
        line: usize,
        #[source]
        source: SchemaError,
    },
    #[error("empty surface form")]
    EmptyForm,
    #[error("duplicate surface form `{0}`")]
    DuplicateForm(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GazetteerEntry {
    pub surface_form: String,
    pub entity_type: EntityType,
    pub context_label: String,
}

#[derive(Debug, Clone)]
pub struct Gazetteer {
    entries: Vec<GazetteerEntry>,
    matchers: Vec<WordMatcher>,
}

impl Gazetteer {
    pub fn new(entries: Vec<GazetteerEntry>) -> Result<Self, GazetteerError> {
        let mut seen = HashSet::new();
        let mut matchers = Vec::with_capacity(entries.len());
        for e in &entries {
            let matcher = WordMatcher::new(&e.surface_form).ok_or(GazetteerError::EmptyForm)?;
            if !seen.insert(e.surface_form.to_lowercase()) {
                return Err(GazetteerError::DuplicateForm(e.surface_form.clone()));
            }
            matchers.push(matcher);
        }
        Ok(Gazetteer { entries, matchers })
    }

    /// Tab-separated `surface_form`, `entity_type`, `context_label`; `#` starts a comment line.
    pub fn from_tsv<R: BufRead>(reader: R) -> Result<Self, GazetteerError> {
        let mut entries = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            let [form, etype, label] = fields.as_slice() else {
                return Err(GazetteerError::Malformed { line: idx + 1 });
            };
            let entity_type = etype.parse().map_err(|source| GazetteerError::Type { line: idx + 1, source })?;
            entries.push(GazetteerEntry {
                surface_form: form.to_string(),
                entity_type,
                context_label: label.to_string(),
            });
        }
        Gazetteer::new(entries)
    }

    pub fn to_tsv(&self) -> String {
        self.entries
            .iter()
            .map(|e| format!("{}\t{}\t{}\n", e.surface_form, e.entity_type, e.context_label))
            .collect()
    }

    pub fn entries(&self) -> &[GazetteerEntry] {
        &self.entries
    }

    /// Entry indices found in `text`, using leftmost-longest non-overlapping
    /// matches so "Apollo 11" wins over a nested "Apollo".
    pub fn find_in(&self, text: &str) -> BTreeSet<usize> {
        let mut hits: Vec<(usize, usize, usize)> = Vec::new();
        for (idx, m) in self.matchers.iter().enumerate() {
            hits.extend(m.find_all(text).into_iter().map(|r| (r.start, r.end, idx)));
        }
        hits.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));
        let mut found = BTreeSet::new();
        let mut covered = 0;
        for (start, end, idx) in hits {
            if start >= covered {
                found.insert(idx);
                covered = end;
            }
        }
        found
    }
}

/// Emits one `describedBy` triple per pair of distinct gazetteer forms that
/// co-occur in a sentence of the excerpt. The lexicographically smaller form
/// is the head. Output is ordered by sentence, then by (head, tail).
pub fn extract_offline(excerpt: &Excerpt, gaz: &Gazetteer) -> Vec<Triple> {
    let mut triples = Vec::new();
    for span in split_sentences(&excerpt.text) {
        let mut forms: Vec<&GazetteerEntry> =
            gaz.find_in(&excerpt.text[span]).into_iter().map(|i| &gaz.entries[i]).collect();
        forms.sort_by(|a, b| a.surface_form.cmp(&b.surface_form));
        for (i, head) in forms.iter().enumerate() {
            for tail in &forms[i + 1..] {
                triples.push(Triple {
                    head: head.surface_form.clone(),
                    head_type: head.entity_type,
                    relation: RelationType::DescribedBy,
                    tail: tail.surface_form.clone(),
                    tail_type: tail.entity_type,
                    excerpt_id: excerpt.id.clone(),
                });
            }
        }
    }
    triples
}
