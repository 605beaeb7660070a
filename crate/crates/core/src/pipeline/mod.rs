//! Stage-by-stage pipeline over files in an output directory:
//! excerpt → extract → graph → cluster → classify → evaluate.

pub mod artifacts;
pub mod config;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{self, CorpusError, Excerpt, ExcerptOptions, KeywordQuery};
use crate::disambig::{self, CommunityProfile, UNKNOWN, UNLABELED};
use crate::evalkit::{self, EvalError, Metrics, Tally};
use crate::extraction::{
    extract_batch, CompletionClient, ExtractorMode, Extractor, Gazetteer, GazetteerError, OfflineExtractor,
    PromptTemplate, ServiceError, ServiceExtractor,
};
use crate::kgraph::{self, ExportFormat, GraphError, KnowledgeGraph};
use crate::leiden::{self, IterationTrace, LeidenError, LeidenParams, Partition, QualityFunction};
use crate::schema::{EntityType, Triple};
use artifacts::{ArtifactMeta, Manifest, StageRecord};
pub use config::{ConfigError, Granularity, HoldoutMode, QuerySpec, RunConfig};

pub const EXCERPTS: &str = "excerpts.jsonl";
pub const GOLD: &str = "gold.csv";
pub const TRIPLES: &str = "triples.jsonl";
pub const GRAPH: &str = "graph.json";
pub const PARTITION: &str = "partition.json";
pub const PROFILES: &str = "profiles.json";
pub const CLASSIFICATION: &str = "classification.csv";
pub const ENTITIES: &str = "entities.csv";
pub const METRICS: &str = "metrics.json";
pub const REPORT: &str = "report.txt";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("gazetteer: {0}")]
    Gazetteer(#[from] GazetteerError),
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Leiden(#[from] LeidenError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("missing {path}; run `kg-disambig {stage}` first")]
    MissingArtifact { path: PathBuf, stage: &'static str },
    #[error("{path}: {message}")]
    Artifact { path: PathBuf, message: String },
    #[error("{0}")]
    Stage(String),
}

/// Whether an excerpt falls in the held-out test split: the first 8 bytes of
/// `sha256(seed_le ‖ id)` read as a fraction of 2^64 fall below `fraction`.
pub fn in_holdout(excerpt_id: &str, seed: u64, fraction: f64) -> bool {
    if fraction <= 0.0 {
        return false;
    }
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(excerpt_id.as_bytes());
    let digest = h.finalize();
    let head = u64::from_be_bytes(digest[..8].try_into().expect("digest has 32 bytes"));
    (head as f64) / 18446744073709551616.0 < fraction
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldRow {
    pub excerpt_id: String,
    pub gold_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRow {
    pub excerpt_id: String,
    pub entity: String,
    pub entity_type: EntityType,
    pub predicted_label: String,
}

/// Node id → community id, written as a JSON object keyed by node id.
mod node_map {
    use serde::de::Error as _;
    use serde::ser::SerializeMap;
    use serde::{Deserialize, Deserializer, Serializer};
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(assignment: &[usize], s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(assignment.len()))?;
        for (node, c) in assignment.iter().enumerate() {
            map.serialize_entry(&node.to_string(), c)?;
        }
        map.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<usize>, D::Error> {
        let raw: BTreeMap<String, usize> = BTreeMap::deserialize(d)?;
        let mut by_node: BTreeMap<usize, usize> = BTreeMap::new();
        for (k, v) in raw {
            by_node.insert(k.parse().map_err(D::Error::custom)?, v);
        }
        if by_node.keys().enumerate().any(|(i, &k)| i != k) {
            return Err(D::Error::custom("node ids must be 0..n"));
        }
        Ok(by_node.into_values().collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionFile {
    pub params: LeidenParams,
    pub quality_function: QualityFunction,
    pub quality_value: f64,
    pub community_sizes: Vec<usize>,
    #[serde(with = "node_map")]
    pub assignment: Vec<usize>,
    pub trace: Vec<IterationTrace>,
}

impl PartitionFile {
    pub fn partition(&self) -> Result<Partition, LeidenError> {
        let mut p = Partition::from_assignment(self.assignment.clone())?;
        p.quality_value = self.quality_value;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProfilesFile {
    positive: String,
    negative: String,
    profiles: Vec<CommunityProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub granularity: Granularity,
    pub tally: Tally,
    pub metrics: Metrics,
    /// Two-decimal presentation of `metrics`.
    pub rounded: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MetricsFile {
    primary: Granularity,
    excerpt: Option<Evaluation>,
    entity: Option<Evaluation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub stage: &'static str,
    pub outputs: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

/// One run of the pipeline for a fixed configuration.
pub struct Pipeline {
    pub config: RunConfig,
    config_text: String,
    config_digest: String,
    out_dir: PathBuf,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let config_text = config.to_text();
        let config_digest = artifacts::sha256_hex(config_text.as_bytes());
        let out_dir = config.out_dir();
        Ok(Pipeline { config, config_text, config_digest, out_dir })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn meta(&self, stage: &str) -> ArtifactMeta {
        ArtifactMeta::new(stage, &self.config_digest)
    }

    fn read(&self, name: &str, producer: &'static str) -> Result<(PathBuf, Vec<u8>), PipelineError> {
        let path = self.artifact(name);
        let bytes = artifacts::read_input(&path, producer)?;
        Ok((path, bytes))
    }

    /// Runs `body`, which returns (inputs, outputs, summary) as file
    /// name/bytes pairs, then writes outputs and the manifest entry.
    fn stage(
        &self,
        stage: &'static str,
        deterministic: bool,
        body: impl FnOnce() -> Result<(Vec<(&'static str, Vec<u8>)>, Vec<(&'static str, Vec<u8>)>, serde_json::Value), PipelineError>,
    ) -> Result<StageOutcome, PipelineError> {
        let started = Instant::now();
        let (inputs, outputs, summary) = body()?;
        let mut record = StageRecord {
            inputs: inputs.iter().map(|(n, b)| (n.to_string(), artifacts::sha256_hex(b))).collect(),
            outputs: BTreeMap::new(),
            elapsed_ms: 0,
            deterministic,
            summary: summary.clone(),
        };
        let mut paths = Vec::new();
        for (name, bytes) in outputs {
            let path = self.artifact(name);
            record.outputs.insert(name.to_string(), artifacts::write_file(&path, &bytes)?);
            paths.push(path);
        }
        record.elapsed_ms = started.elapsed().as_millis() as u64;
        let mut manifest = Manifest::open(&self.out_dir, &self.config_text)?;
        manifest.stages.insert(stage.to_string(), record);
        manifest.save(&self.out_dir)?;
        log::info!("{stage}: {summary}");
        Ok(StageOutcome { stage, outputs: paths, summary })
    }

    fn queries(&self) -> Result<Vec<KeywordQuery>, PipelineError> {
        self.config
            .queries
            .iter()
            .map(|q| {
                let mut any_of = q.any_of.clone();
                if let Some(file) = &q.any_of_file {
                    any_of.extend(config::read_term_file(&self.config.resolve(file))?);
                }
                Ok(KeywordQuery::new(q.label.clone(), q.all_of.clone(), any_of)?)
            })
            .collect()
    }

    pub fn excerpt(&self) -> Result<StageOutcome, PipelineError> {
        self.stage("excerpt", true, || {
            let corpus_path = self.config.resolve(&self.config.corpus);
            let corpus_bytes = std::fs::read(&corpus_path).map_err(|source| PipelineError::Io { path: corpus_path.clone(), source })?;
            let docs = corpus::load_corpus(corpus_bytes.as_slice())?;
            let queries = self.queries()?;
            let mut labels_of: HashMap<String, Vec<String>> = HashMap::new();
            for q in &queries {
                for d in corpus::filter_documents(&docs, q) {
                    labels_of.entry(d.id).or_default().push(q.label.clone());
                }
            }
            let opts = ExcerptOptions { max_words: self.config.max_words, dedup: self.config.dedup_excerpts };
            let mut excerpts = Vec::new();
            let mut per_query: BTreeMap<String, usize> = queries.iter().map(|q| (q.label.clone(), 0)).collect();
            let (mut matched_docs, mut overlong, mut deduplicated) = (0, 0, 0);
            for doc in &docs {
                let Some(labels) = labels_of.get(&doc.id) else { continue };
                matched_docs += 1;
                let report = corpus::extract_excerpts(doc, &self.config.term, opts)?;
                overlong += report.skipped_overlong;
                deduplicated += report.deduplicated;
                for label in labels {
                    *per_query.get_mut(label).expect("query label registered") += report.excerpts.len();
                }
                excerpts.extend(report.excerpts.into_iter().map(|mut e| {
                    e.gold_label = Some(labels[0].clone());
                    e
                }));
            }
            if excerpts.is_empty() {
                log::warn!("no excerpts: no document matched a query and contained `{}`", self.config.term);
            }
            let gold: Vec<GoldRow> = excerpts
                .iter()
                .map(|e| GoldRow { excerpt_id: e.id.clone(), gold_label: e.gold_label.clone().unwrap_or_default() })
                .collect();
            let meta = self.meta("excerpt");
            let summary = serde_json::json!({
                "documents": docs.len(),
                "matched_documents": matched_docs,
                "excerpts": excerpts.len(),
                "per_query": per_query,
                "skipped_overlong": overlong,
                "deduplicated": deduplicated,
            });
            Ok((
                vec![("corpus", corpus_bytes)],
                vec![(EXCERPTS, artifacts::jsonl_bytes(&meta, &excerpts)), (GOLD, artifacts::csv_bytes(&meta, &gold)?)],
                summary,
            ))
        })
    }

    fn load_excerpts(&self) -> Result<(Vec<u8>, Vec<Excerpt>), PipelineError> {
        let (path, bytes) = self.read(EXCERPTS, "excerpt")?;
        let excerpts = artifacts::parse_jsonl(&path, &bytes)?;
        Ok((bytes, excerpts))
    }

    fn load_triples(&self) -> Result<(Vec<u8>, Vec<Triple>), PipelineError> {
        let (path, bytes) = self.read(TRIPLES, "extract")?;
        let triples = artifacts::parse_jsonl(&path, &bytes)?;
        Ok((bytes, triples))
    }

    fn load_graph(&self) -> Result<(Vec<u8>, KnowledgeGraph), PipelineError> {
        let (_, bytes) = self.read(GRAPH, "graph")?;
        let text = String::from_utf8_lossy(&bytes).into_owned();
        Ok((bytes, kgraph::import_json(&text)?))
    }

    fn load_partition(&self, g: &KnowledgeGraph) -> Result<(Vec<u8>, Partition), PipelineError> {
        let (path, bytes) = self.read(PARTITION, "cluster")?;
        let file: PartitionFile = artifacts::parse_json(&path, &bytes)?;
        let p = file.partition()?;
        leiden::validate_partition(g.node_count(), &p)?;
        Ok((bytes, p))
    }

    fn extractor(&self) -> Result<Box<dyn Extractor>, PipelineError> {
        match self.config.extractor.mode {
            ExtractorMode::Offline => {
                let rel = self
                    .config
                    .gazetteer
                    .as_ref()
                    .ok_or_else(|| PipelineError::Stage("offline extraction needs `gazetteer = <file>`".into()))?;
                let path = self.config.resolve(rel);
                let file = std::fs::File::open(&path).map_err(|source| PipelineError::Io { path: path.clone(), source })?;
                let gazetteer = Gazetteer::from_tsv(std::io::BufReader::new(file))?;
                Ok(Box::new(OfflineExtractor { gazetteer }))
            }
            ExtractorMode::Service => Ok(Box::new(ServiceExtractor {
                client: CompletionClient::from_env(self.config.extractor.clone())?,
                template: PromptTemplate::few_shot(),
                policy: self.config.invalid_policy,
            })),
        }
    }

    pub fn extract(&self) -> Result<StageOutcome, PipelineError> {
        let deterministic = self.config.extractor.mode == ExtractorMode::Offline;
        self.stage("extract", deterministic, || {
            let (input, excerpts) = self.load_excerpts()?;
            let extractor = self.extractor()?;
            let mut triples: Vec<Triple> = Vec::new();
            let summary = extract_batch(&excerpts, extractor.as_ref(), self.config.extractor.parallelism, &mut triples)
                .map_err(|e| PipelineError::Stage(format!("extraction aborted: {e}")))?;
            let failures: Vec<_> =
                summary.failures.iter().map(|(id, msg)| serde_json::json!({ "excerpt_id": id, "error": msg })).collect();
            let summary = serde_json::json!({
                "mode": self.config.extractor.mode.to_string(),
                "ok": summary.ok,
                "failed": summary.failed,
                "triples": summary.triples,
                "warnings": summary.warnings,
                "failures": failures,
            });
            Ok((vec![(EXCERPTS, input)], vec![(TRIPLES, artifacts::jsonl_bytes(&self.meta("extract"), &triples))], summary))
        })
    }

    fn is_test(&self, excerpt_id: &str) -> bool {
        in_holdout(excerpt_id, self.config.holdout_seed, self.config.holdout_fraction)
    }

    /// Excerpts to classify: the holdout split, or every excerpt when the
    /// holdout fraction is zero.
    fn test_set<'a>(&self, excerpts: &'a [Excerpt]) -> Vec<&'a Excerpt> {
        if self.config.holdout_fraction <= 0.0 {
            return excerpts.iter().collect();
        }
        excerpts.iter().filter(|e| self.is_test(&e.id)).collect()
    }

    pub fn graph(&self) -> Result<StageOutcome, PipelineError> {
        self.stage("graph", true, || {
            let (excerpt_bytes, excerpts) = self.load_excerpts()?;
            let (triple_bytes, triples) = self.load_triples()?;
            let test: BTreeSet<&str> =
                excerpts.iter().filter(|e| self.is_test(&e.id)).map(|e| e.id.as_str()).collect();
            let gold: HashMap<String, String> = excerpts
                .iter()
                .filter(|e| !test.contains(e.id.as_str()))
                .filter_map(|e| Some((e.id.clone(), e.gold_label.clone()?)))
                .collect();
            let used: Vec<Triple> = match self.config.holdout_mode {
                HoldoutMode::Inductive => {
                    triples.into_iter().filter(|t| !test.contains(t.excerpt_id.as_str())).collect()
                }
                HoldoutMode::Transductive => triples,
            };
            let g = kgraph::build_graph(&used, &gold);
            let summary = serde_json::json!({
                "nodes": g.node_count(),
                "edges": g.edges.len(),
                "total_weight": g.total_weight(),
                "triples_used": used.len(),
                "training_excerpts": excerpts.len() - test.len(),
                "holdout_excerpts": test.len(),
                "holdout_mode": self.config.holdout_mode.to_string(),
                "dropped_self_loops": g.dropped_self_loops,
            });
            Ok((
                vec![(EXCERPTS, excerpt_bytes), (TRIPLES, triple_bytes)],
                vec![(GRAPH, artifacts::json_bytes(&self.meta("graph"), &g))],
                summary,
            ))
        })
    }

    pub fn cluster(&self) -> Result<StageOutcome, PipelineError> {
        self.stage("cluster", true, || {
            let (graph_bytes, g) = self.load_graph()?;
            let params = self.config.leiden.clone();
            let result = leiden::run_leiden(&g, &params)?;
            let p = &result.partition;
            let file = PartitionFile {
                quality_function: params.quality,
                params,
                quality_value: p.quality_value,
                community_sizes: leiden::community_sizes(p),
                assignment: p.assignment.clone(),
                trace: result.trace.clone(),
            };
            let summary = serde_json::json!({
                "communities": p.community_count(),
                "quality": p.quality_value,
                "iterations": result.trace.len(),
                "community_sizes": file.community_sizes,
            });
            Ok((vec![(GRAPH, graph_bytes)], vec![(PARTITION, artifacts::json_bytes(&self.meta("cluster"), &file))], summary))
        })
    }

    pub fn classify(&self) -> Result<StageOutcome, PipelineError> {
        self.stage("classify", true, || {
            let (graph_bytes, g) = self.load_graph()?;
            let (partition_bytes, p) = self.load_partition(&g)?;
            let (excerpt_bytes, excerpts) = self.load_excerpts()?;
            let (triple_bytes, triples) = self.load_triples()?;
            let profiles = disambig::profile_communities(&g, &p)?;
            let mut by_excerpt: HashMap<&str, Vec<Triple>> = HashMap::new();
            for t in &triples {
                by_excerpt.entry(t.excerpt_id.as_str()).or_default().push(t.clone());
            }
            let empty = Vec::new();
            let test = self.test_set(&excerpts);
            let batch: Vec<(&str, &[Triple])> = test
                .iter()
                .map(|e| (e.id.as_str(), by_excerpt.get(e.id.as_str()).unwrap_or(&empty).as_slice()))
                .collect();
            let rows = disambig::classify_batch(batch.iter().copied(), &g, &p, &profiles);
            let entity_rows: Vec<EntityRow> = batch
                .iter()
                .flat_map(|&(id, ts)| {
                    disambig::entity_predictions(ts, &g, &p, &profiles).into_iter().map(move |(key, label)| EntityRow {
                        excerpt_id: id.to_string(),
                        entity: key.label_norm,
                        entity_type: key.entity_type,
                        predicted_label: label,
                    })
                })
                .collect();
            let mut predicted: BTreeMap<&str, usize> = BTreeMap::new();
            for r in &rows {
                *predicted.entry(r.predicted_label.as_str()).or_default() += 1;
            }
            let labeled = profiles.iter().filter(|pr| pr.assigned_label != UNLABELED).count();
            let summary = serde_json::json!({
                "classified": rows.len(),
                "unknown": predicted.get(UNKNOWN).copied().unwrap_or(0),
                "predicted": predicted,
                "entity_rows": entity_rows.len(),
                "labeled_communities": labeled,
            });
            let meta = self.meta("classify");
            let profiles_file = ProfilesFile {
                positive: self.config.positive_label.clone(),
                negative: self.config.negative_label.clone(),
                profiles,
            };
            Ok((
                vec![(GRAPH, graph_bytes), (PARTITION, partition_bytes), (EXCERPTS, excerpt_bytes), (TRIPLES, triple_bytes)],
                vec![
                    (PROFILES, artifacts::json_bytes(&meta, &profiles_file)),
                    (CLASSIFICATION, artifacts::csv_bytes(&meta, &rows)?),
                    (ENTITIES, artifacts::csv_bytes(&meta, &entity_rows)?),
                ],
                summary,
            ))
        })
    }

    fn evaluate_rows<'a>(
        &self,
        granularity: Granularity,
        rows: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Evaluation, PipelineError> {
        let skip = BTreeSet::from([UNKNOWN.to_string(), UNLABELED.to_string()]);
        let tally = evalkit::tally(rows, &self.config.positive_label, &self.config.negative_label, &skip)?;
        let metrics = evalkit::derive_metrics(&tally.matrix)?;
        let mut rounded = BTreeMap::new();
        rounded.insert("accuracy".to_string(), evalkit::format_pct(Some(metrics.accuracy)));
        for c in [&metrics.positive, &metrics.negative] {
            rounded.insert(format!("{}.precision", c.label), evalkit::format_pct(c.precision));
            rounded.insert(format!("{}.recall", c.label), evalkit::format_pct(c.recall));
            rounded.insert(format!("{}.f1", c.label), evalkit::format_pct(c.f1));
        }
        Ok(Evaluation { granularity, tally, metrics, rounded })
    }

    pub fn evaluate(&self) -> Result<StageOutcome, PipelineError> {
        self.stage("evaluate", true, || {
            let (class_path, class_bytes) = self.read(CLASSIFICATION, "classify")?;
            let (entity_path, entity_bytes) = self.read(ENTITIES, "classify")?;
            let (profiles_path, profiles_bytes) = self.read(PROFILES, "classify")?;
            let (gold_path, gold_bytes) = self.read(GOLD, "excerpt")?;
            let classified: Vec<disambig::Classification> = artifacts::parse_csv(&class_path, &class_bytes)?;
            let entities: Vec<EntityRow> = artifacts::parse_csv(&entity_path, &entity_bytes)?;
            let profiles: ProfilesFile = artifacts::parse_json(&profiles_path, &profiles_bytes)?;
            let gold: HashMap<String, String> = artifacts::parse_csv::<GoldRow>(&gold_path, &gold_bytes)?
                .into_iter()
                .map(|r| (r.excerpt_id, r.gold_label))
                .collect();
            let gold_of = |id: &str| {
                gold.get(id).map(String::as_str).ok_or_else(|| PipelineError::Artifact {
                    path: gold_path.clone(),
                    message: format!("no gold label for excerpt `{id}`"),
                })
            };
            let excerpt_rows: Vec<(&str, &str)> = classified
                .iter()
                .map(|r| Ok((gold_of(&r.excerpt_id)?, r.predicted_label.as_str())))
                .collect::<Result<_, PipelineError>>()?;
            let entity_pairs: Vec<(&str, &str)> = entities
                .iter()
                .map(|r| Ok((gold_of(&r.excerpt_id)?, r.predicted_label.as_str())))
                .collect::<Result<_, PipelineError>>()?;
            let primary = self.config.granularity;
            let excerpt_eval = self.evaluate_rows(Granularity::Excerpt, excerpt_rows);
            let entity_eval = self.evaluate_rows(Granularity::Entity, entity_pairs);
            let chosen = match primary {
                Granularity::Excerpt => &excerpt_eval,
                Granularity::Entity => &entity_eval,
            };
            let chosen = match chosen {
                Ok(e) => e.clone(),
                Err(e) => return Err(PipelineError::Stage(format!("{primary}-level evaluation failed: {e}"))),
            };
            let mut report = evalkit::distribution_table(&profiles.profiles, &profiles.positive, &profiles.negative);
            report.push_str(&format!("\n{primary}-level evaluation\n"));
            report.push_str(&evalkit::render_report(&chosen.tally, &chosen.metrics));
            let file = MetricsFile { primary, excerpt: excerpt_eval.ok(), entity: entity_eval.ok() };
            let summary = serde_json::json!({
                "granularity": primary.to_string(),
                "evaluated": chosen.tally.matrix.total(),
                "skipped": chosen.tally.skipped,
                "accuracy": chosen.rounded["accuracy"],
            });
            Ok((
                vec![(CLASSIFICATION, class_bytes), (ENTITIES, entity_bytes), (PROFILES, profiles_bytes), (GOLD, gold_bytes)],
                vec![(METRICS, artifacts::json_bytes(&self.meta("evaluate"), &file)), (REPORT, report.into_bytes())],
                summary,
            ))
        })
    }

    pub fn run_all(&self) -> Result<Vec<StageOutcome>, PipelineError> {
        Ok(vec![self.excerpt()?, self.extract()?, self.graph()?, self.cluster()?, self.classify()?, self.evaluate()?])
    }

    /// Writes the graph in `format` to `dest`, or to `graph.<ext>` in the
    /// output directory.
    pub fn export(&self, format: ExportFormat, dest: Option<&Path>) -> Result<PathBuf, PipelineError> {
        let (_, g) = self.load_graph()?;
        let ext = match format {
            ExportFormat::GraphMl => "graphml",
            ExportFormat::Dot => "dot",
            ExportFormat::Json => "export.json",
        };
        let path = dest.map_or_else(|| self.artifact(&format!("graph.{ext}")), Path::to_path_buf);
        artifacts::write_file(&path, &kgraph::export_graph(&g, format))?;
        Ok(path)
    }
}
