//! Corpus loading, keyword filtering and sentence-complete excerpt
//! extraction around an ambiguous term.

use std::collections::{BTreeSet, HashSet};
use std::io::BufRead;
use std::ops::Range;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default excerpt word cap.
pub const DEFAULT_MAX_WORDS: usize = 256;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: document id must be non-empty")]
    EmptyId { line: usize },
    #[error("line {line}: duplicate document id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("search term must be non-empty")]
    EmptyTerm,
    #[error("max_words must be at least 1")]
    ZeroMaxWords,
    #[error("invalid keyword query: {0}")]
    InvalidQuery(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    #[serde(default)]
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub tags: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordQuery {
    pub label: String,
    pub all_of: Vec<String>,
    #[serde(default)]
    pub any_of: Vec<String>,
}

impl KeywordQuery {
    pub fn new(label: impl Into<String>, all_of: Vec<String>, any_of: Vec<String>) -> Result<Self, CorpusError> {
        let q = KeywordQuery { label: label.into(), all_of, any_of };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.label.trim().is_empty() {
            return Err(CorpusError::InvalidQuery("label is empty".into()));
        }
        if self.all_of.is_empty() {
            return Err(CorpusError::InvalidQuery(format!("query `{}` has no all_of terms", self.label)));
        }
        if self.all_of.iter().chain(&self.any_of).any(|t| t.trim().is_empty()) {
            return Err(CorpusError::InvalidQuery(format!("query `{}` has an empty term", self.label)));
        }
        Ok(())
    }

    pub fn matches(&self, text: &str) -> bool {
        self.all_of.iter().all(|t| contains_word(text, t))
            && (self.any_of.is_empty() || self.any_of.iter().any(|t| contains_word(text, t)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Excerpt {
    pub id: String,
    pub doc_id: String,
    pub text: String,
    pub term: String,
    pub word_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_label: Option<String>,
}

/// Reads a JSONL corpus. Blank lines are skipped; ids must be unique.
pub fn load_corpus<R: BufRead>(reader: R) -> Result<Vec<Document>, CorpusError> {
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document =
            serde_json::from_str(&line).map_err(|source| CorpusError::Parse { line: line_no, source })?;
        if doc.id.is_empty() {
            return Err(CorpusError::EmptyId { line: line_no });
        }
        if !seen.insert(doc.id.clone()) {
            return Err(CorpusError::DuplicateId { line: line_no, id: doc.id });
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn load_corpus_file(path: &std::path::Path) -> Result<Vec<Document>, CorpusError> {
    let file = std::fs::File::open(path)?;
    load_corpus(std::io::BufReader::new(file))
}

/// Documents satisfying `query`, each tagged with the query label.
pub fn filter_documents(docs: &[Document], query: &KeywordQuery) -> Vec<Document> {
    docs.iter()
        .filter(|d| query.matches(&d.body))
        .map(|d| {
            let mut d = d.clone();
            d.tags.insert(query.label.clone());
            d
        })
        .collect()
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Case-insensitive whole-word matcher for a (possibly multi-word) term.
///
/// Whitespace inside the term matches any whitespace run. A match must not be
/// directly preceded or followed by an alphanumeric character.
#[derive(Debug, Clone)]
pub struct WordMatcher {
    re: Regex,
}

impl WordMatcher {
    /// `None` when the term has no non-whitespace content.
    pub fn new(term: &str) -> Option<Self> {
        let parts: Vec<String> = term.split_whitespace().map(regex::escape).collect();
        if parts.is_empty() {
            return None;
        }
        let re = RegexBuilder::new(&parts.join(r"\s+"))
            .case_insensitive(true)
            .build()
            .expect("escaped term is a valid pattern");
        Some(WordMatcher { re })
    }

    pub fn find_all(&self, text: &str) -> Vec<Range<usize>> {
        let mut hits = Vec::new();
        let mut pos = 0;
        while pos <= text.len() {
            let Some(m) = self.re.find_at(text, pos) else { break };
            let before_ok = text[..m.start()].chars().next_back().map_or(true, |c| !is_word_char(c));
            let after_ok = text[m.end()..].chars().next().map_or(true, |c| !is_word_char(c));
            if before_ok && after_ok {
                hits.push(m.range());
                pos = m.end().max(m.start() + 1);
            } else {
                pos = m.start() + text[m.start()..].chars().next().map_or(1, char::len_utf8);
            }
            while pos < text.len() && !text.is_char_boundary(pos) {
                pos += 1;
            }
        }
        hits
    }

    pub fn is_match(&self, text: &str) -> bool {
        !self.find_all(text).is_empty()
    }
}

/// Byte ranges of case-insensitive whole-word occurrences of `term`.
pub fn find_whole_word(text: &str, term: &str) -> Vec<Range<usize>> {
    WordMatcher::new(term).map(|m| m.find_all(text)).unwrap_or_default()
}

pub fn contains_word(text: &str, term: &str) -> bool {
    !find_whole_word(text, term).is_empty()
}

/// Tokens ending in `.` that never close a sentence (compared case-insensitively).
const ABBREVIATIONS: &[&str] = &[
    "al.", "e.g.", "i.e.", "fig.", "figs.", "eq.", "eqs.", "ref.", "refs.", "cf.", "vs.", "etc.", "dr.",
    "mr.", "mrs.", "ms.", "prof.", "no.", "vol.", "approx.", "sect.", "tab.", "ca.",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];

fn is_guarded(token: &str) -> bool {
    let token = token.trim_start_matches(|c: char| matches!(c, '(' | '[' | '"' | '\'' | '\u{201c}' | '\u{2018}'));
    let lower = token.to_lowercase();
    if ABBREVIATIONS.contains(&lower.as_str()) {
        return true;
    }
    // Single-letter initials such as "A." in "J. A. Smith".
    let mut chars = token.chars();
    matches!((chars.next(), chars.next(), chars.next()), (Some(c), Some('.'), None) if c.is_uppercase())
}

/// Sentence spans as byte ranges. Spans are ordered, disjoint, and together
/// cover every non-whitespace character of `text`.
pub fn split_sentences(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut token_start = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if c.is_whitespace() {
            continue;
        }
        if start.is_none() {
            start = Some(i);
        }
        if i == 0 || text[..i].chars().next_back().is_some_and(char::is_whitespace) {
            token_start = i;
        }
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let mut end = i + c.len_utf8();
        while let Some(&(j, next)) = iter.peek() {
            if matches!(next, '.' | '!' | '?') || CLOSERS.contains(&next) {
                end = j + next.len_utf8();
                iter.next();
            } else {
                break;
            }
        }
        let at_break = iter.peek().map_or(true, |&(_, next)| next.is_whitespace());
        if !at_break {
            continue;
        }
        if c == '.' && is_guarded(&text[token_start..end]) {
            continue;
        }
        spans.push(start.take().unwrap_or(token_start)..end);
    }
    if let Some(s) = start {
        let end = text.trim_end().len();
        spans.push(s..end);
    }
    spans
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExcerptOptions {
    pub max_words: usize,
    /// Drop excerpts whose span lies inside an earlier excerpt's span.
    pub dedup: bool,
}

impl Default for ExcerptOptions {
    fn default() -> Self {
        ExcerptOptions { max_words: DEFAULT_MAX_WORDS, dedup: false }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExcerptReport {
    pub excerpts: Vec<Excerpt>,
    /// Byte spans of each excerpt within the document body.
    pub spans: Vec<Range<usize>>,
    /// Occurrences whose own sentence alone exceeds the word cap.
    pub skipped_overlong: usize,
    /// Occurrences dropped by span deduplication.
    pub deduplicated: usize,
}

/// Grows a sentence window around `hit`, always extending the side holding
/// fewer words (left on ties) and falling back to the other side when the
/// preferred sentence does not fit under `max_words`.
pub fn grow_window(sentence_words: &[usize], hit: usize, max_words: usize) -> Option<Range<usize>> {
    let mut total = sentence_words[hit];
    if total > max_words {
        return None;
    }
    let (mut lo, mut hi) = (hit, hit + 1);
    let (mut left_words, mut right_words) = (0usize, 0usize);
    let (mut left_open, mut right_open) = (lo > 0, hi < sentence_words.len());
    while left_open || right_open {
        let prefer_left = left_open && (!right_open || left_words <= right_words);
        if prefer_left {
            let w = sentence_words[lo - 1];
            if total + w <= max_words {
                lo -= 1;
                total += w;
                left_words += w;
                left_open = lo > 0;
            } else {
                left_open = false;
            }
        } else {
            let w = sentence_words[hi];
            if total + w <= max_words {
                hi += 1;
                total += w;
                right_words += w;
                right_open = hi < sentence_words.len();
            } else {
                right_open = false;
            }
        }
    }
    Some(lo..hi)
}

/// One excerpt per whole-word occurrence of `term` in `doc.body`.
pub fn extract_excerpts(doc: &Document, term: &str, opts: ExcerptOptions) -> Result<ExcerptReport, CorpusError> {
    if term.trim().is_empty() {
        return Err(CorpusError::EmptyTerm);
    }
    if opts.max_words == 0 {
        return Err(CorpusError::ZeroMaxWords);
    }
    let body = &doc.body;
    let sentences = split_sentences(body);
    let words: Vec<usize> = sentences.iter().map(|s| word_count(&body[s.clone()])).collect();
    let mut report = ExcerptReport::default();
    let mut sentence_idx = 0;
    for (occurrence, hit) in find_whole_word(body, term).into_iter().enumerate() {
        while sentence_idx + 1 < sentences.len() && sentences[sentence_idx].end <= hit.start {
            sentence_idx += 1;
        }
        let Some(window) = grow_window(&words, sentence_idx, opts.max_words) else {
            report.skipped_overlong += 1;
            continue;
        };
        let span = sentences[window.start].start..sentences[window.end - 1].end;
        if opts.dedup && report.spans.iter().any(|s| s.start <= span.start && span.end <= s.end) {
            report.deduplicated += 1;
            continue;
        }
        let text = body[span.clone()].to_string();
        report.excerpts.push(Excerpt {
            id: format!("{}#{}", doc.id, occurrence),
            doc_id: doc.id.clone(),
            word_count: word_count(&text),
            text,
            term: term.to_string(),
            gold_label: None,
        });
        report.spans.push(span);
    }
    Ok(report)
}
