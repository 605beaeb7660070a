//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment line; blank lines are
//! ignored. List values are comma-separated. Relative paths are resolved
//! against the directory holding the config file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DEFAULT_MAX_WORDS;
use crate::extraction::{ExtractorConfig, InvalidPolicy};
use crate::leiden::{LeidenParams, QualityFunction};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value for `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("{0}")]
    Invalid(String),
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HoldoutMode {
    /// Held-out excerpts contribute nothing to the graph.
    #[default]
    Inductive,
    /// Held-out triples join the graph; only their gold labels are withheld.
    Transductive,
}

impl FromStr for HoldoutMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inductive" => Ok(HoldoutMode::Inductive),
            "transductive" => Ok(HoldoutMode::Transductive),
            other => Err(format!("unknown holdout mode `{other}`")),
        }
    }
}

impl std::fmt::Display for HoldoutMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HoldoutMode::Inductive => "inductive",
            HoldoutMode::Transductive => "transductive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    #[default]
    Excerpt,
    Entity,
}

impl FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "excerpt" => Ok(Granularity::Excerpt),
            "entity" => Ok(Granularity::Entity),
            other => Err(format!("unknown granularity `{other}`")),
        }
    }
}

impl std::fmt::Display for Granularity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Granularity::Excerpt => "excerpt",
            Granularity::Entity => "entity",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuerySpec {
    pub label: String,
    pub all_of: Vec<String>,
    pub any_of: Vec<String>,
    /// Extra `any_of` terms, one per line.
    pub any_of_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Directory relative paths are resolved against. Not serialized.
    pub base_dir: PathBuf,
    pub corpus: PathBuf,
    pub term: String,
    pub max_words: usize,
    pub dedup_excerpts: bool,
    /// In file order; a document's gold label is its first matching query.
    pub queries: Vec<QuerySpec>,
    pub gazetteer: Option<PathBuf>,
    pub extractor: ExtractorConfig,
    pub invalid_policy: InvalidPolicy,
    pub leiden: LeidenParams,
    pub holdout_fraction: f64,
    pub holdout_seed: u64,
    pub holdout_mode: HoldoutMode,
    pub out: PathBuf,
    pub positive_label: String,
    pub negative_label: String,
    pub granularity: Granularity,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            base_dir: PathBuf::new(),
            corpus: PathBuf::new(),
            term: String::new(),
            max_words: DEFAULT_MAX_WORDS,
            dedup_excerpts: false,
            queries: Vec::new(),
            gazetteer: None,
            extractor: ExtractorConfig::default(),
            invalid_policy: InvalidPolicy::default(),
            leiden: LeidenParams::default(),
            holdout_fraction: 0.0,
            holdout_seed: 0,
            holdout_mode: HoldoutMode::default(),
            out: PathBuf::from("out"),
            positive_label: "crater".into(),
            negative_label: "mission".into(),
            granularity: Granularity::default(),
        }
    }
}

fn list(value: &str) -> Vec<String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("expected true or false, got `{other}`")),
    }
}

fn parsed<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| e.to_string())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg = RunConfig::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen_corpus = false;
        let mut seen_term = false;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::Syntax { line, message: "expected `key = value`".into() });
            };
            let (key, value) = (key.trim(), value.trim());
            let bad = |message: String| ConfigError::Value { line, key: key.to_string(), message };
            match key {
                "corpus" => {
                    cfg.corpus = value.into();
                    seen_corpus = true;
                }
                "term" => {
                    cfg.term = value.into();
                    seen_term = true;
                }
                "max_words" => cfg.max_words = parsed(value).map_err(bad)?,
                "dedup_excerpts" => cfg.dedup_excerpts = parse_bool(value).map_err(bad)?,
                "gazetteer" => cfg.gazetteer = Some(value.into()),
                "extractor.mode" => cfg.extractor.mode = parsed(value).map_err(bad)?,
                "extractor.model" => cfg.extractor.model_name = value.into(),
                "extractor.temperature" => cfg.extractor.temperature = parsed(value).map_err(bad)?,
                "extractor.endpoint" => cfg.extractor.endpoint_url = value.into(),
                "extractor.max_attempts" => cfg.extractor.max_attempts = parsed(value).map_err(bad)?,
                "extractor.timeout_ms" => {
                    cfg.extractor.request_timeout = Duration::from_millis(parsed(value).map_err(bad)?)
                }
                "extractor.backoff_ms" => cfg.extractor.backoff_base = Duration::from_millis(parsed(value).map_err(bad)?),
                "extractor.min_interval_ms" => {
                    cfg.extractor.min_request_interval = Duration::from_millis(parsed(value).map_err(bad)?)
                }
                "extractor.parallelism" => cfg.extractor.parallelism = parsed(value).map_err(bad)?,
                "extractor.invalid" => cfg.invalid_policy = parsed(value).map_err(bad)?,
                "leiden.quality" => cfg.leiden.quality = parsed(value).map_err(bad)?,
                "leiden.resolution" => cfg.leiden.resolution = parsed(value).map_err(bad)?,
                "leiden.randomness" => cfg.leiden.randomness = parsed(value).map_err(bad)?,
                "leiden.seed" => cfg.leiden.seed = parsed(value).map_err(bad)?,
                "leiden.max_iterations" => cfg.leiden.max_iterations = parsed(value).map_err(bad)?,
                "leiden.min_quality_gain" => cfg.leiden.min_quality_gain = parsed(value).map_err(bad)?,
                "holdout.fraction" => cfg.holdout_fraction = parsed(value).map_err(bad)?,
                "holdout.seed" => cfg.holdout_seed = parsed(value).map_err(bad)?,
                "holdout.mode" => cfg.holdout_mode = parsed(value).map_err(bad)?,
                "out" => cfg.out = value.into(),
                "eval.positive" => cfg.positive_label = value.into(),
                "eval.negative" => cfg.negative_label = value.into(),
                "eval.granularity" => cfg.granularity = parsed(value).map_err(bad)?,
                _ => {
                    let Some(rest) = key.strip_prefix("query.") else {
                        return Err(ConfigError::UnknownKey { line, key: key.into() });
                    };
                    let Some((label, field)) = rest.rsplit_once('.') else {
                        return Err(ConfigError::UnknownKey { line, key: key.into() });
                    };
                    let idx = match cfg.queries.iter().position(|q| q.label == label) {
                        Some(i) => i,
                        None => {
                            cfg.queries.push(QuerySpec {
                                label: label.into(),
                                all_of: Vec::new(),
                                any_of: Vec::new(),
                                any_of_file: None,
                            });
                            cfg.queries.len() - 1
                        }
                    };
                    let q = &mut cfg.queries[idx];
                    match field {
                        "all_of" => q.all_of = list(value),
                        "any_of" => q.any_of = list(value),
                        "any_of_file" => q.any_of_file = Some(value.into()),
                        _ => return Err(ConfigError::UnknownKey { line, key: key.into() }),
                    }
                }
            }
        }
        if !seen_corpus {
            return Err(ConfigError::Missing("corpus"));
        }
        if !seen_term {
            return Err(ConfigError::Missing("term"));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.term.trim().is_empty() {
            return Err(ConfigError::Invalid("term is empty".into()));
        }
        if self.max_words == 0 {
            return Err(ConfigError::Invalid("max_words must be at least 1".into()));
        }
        if self.queries.is_empty() {
            return Err(ConfigError::Invalid("at least one query.<label>.all_of is required".into()));
        }
        if let Some(q) = self.queries.iter().find(|q| q.all_of.is_empty()) {
            return Err(ConfigError::Invalid(format!("query `{}` has no all_of terms", q.label)));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(ConfigError::Invalid("holdout.fraction must be in [0, 1)".into()));
        }
        if self.positive_label == self.negative_label {
            return Err(ConfigError::Invalid("eval.positive and eval.negative must differ".into()));
        }
        self.leiden.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Canonical file form; `parse` of this text returns an equal config
    /// (apart from `base_dir`).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
        kv("corpus", self.corpus.display().to_string());
        kv("term", self.term.clone());
        kv("max_words", self.max_words.to_string());
        kv("dedup_excerpts", self.dedup_excerpts.to_string());
        for q in &self.queries {
            kv(&format!("query.{}.all_of", q.label), q.all_of.join(", "));
            if !q.any_of.is_empty() {
                kv(&format!("query.{}.any_of", q.label), q.any_of.join(", "));
            }
            if let Some(f) = &q.any_of_file {
                kv(&format!("query.{}.any_of_file", q.label), f.display().to_string());
            }
        }
        if let Some(g) = &self.gazetteer {
            kv("gazetteer", g.display().to_string());
        }
        let e = &self.extractor;
        kv("extractor.mode", e.mode.to_string());
        kv("extractor.model", e.model_name.clone());
        kv("extractor.temperature", e.temperature.to_string());
        kv("extractor.endpoint", e.endpoint_url.clone());
        kv("extractor.max_attempts", e.max_attempts.to_string());
        kv("extractor.timeout_ms", e.request_timeout.as_millis().to_string());
        kv("extractor.backoff_ms", e.backoff_base.as_millis().to_string());
        kv("extractor.min_interval_ms", e.min_request_interval.as_millis().to_string());
        kv("extractor.parallelism", e.parallelism.to_string());
        kv("extractor.invalid", self.invalid_policy.to_string());
        let l = &self.leiden;
        kv("leiden.quality", l.quality.to_string());
        kv("leiden.resolution", l.resolution.to_string());
        kv("leiden.randomness", l.randomness.to_string());
        kv("leiden.seed", l.seed.to_string());
        kv("leiden.max_iterations", l.max_iterations.to_string());
        kv("leiden.min_quality_gain", l.min_quality_gain.to_string());
        kv("holdout.fraction", self.holdout_fraction.to_string());
        kv("holdout.seed", self.holdout_seed.to_string());
        kv("holdout.mode", self.holdout_mode.to_string());
        kv("out", self.out.display().to_string());
        kv("eval.positive", self.positive_label.clone());
        kv("eval.negative", self.negative_label.clone());
        kv("eval.granularity", self.granularity.to_string());
        out
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.out)
    }

    pub fn quality(&self) -> QualityFunction {
        self.leiden.quality
    }
}

/// Reads one term per line; blank lines and `#` comments are skipped.
pub fn read_term_file(path: &Path) -> Result<Vec<String>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}
