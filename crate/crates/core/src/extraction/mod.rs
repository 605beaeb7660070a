//! Excerpt → triple extraction, through a chat-completion service or the
//! offline gazetteer extractor.

mod gazetteer;
mod prompt;
mod response;
mod service;

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use thiserror::Error;

pub use gazetteer::{extract_offline, Gazetteer, GazetteerEntry, GazetteerError};
pub use prompt::{build_prompt, PromptTemplate, TemplateError, PLACEHOLDER};
pub use response::{format_triples, parse_extraction_response, ElementWarning, InvalidPolicy, ParsedResponse, ResponseError};
pub use service::{CompletionClient, ExtractorConfig, ExtractorMode, ServiceError, API_KEY_ENV};

use crate::corpus::Excerpt;
use crate::schema::Triple;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error(transparent)]
    Service(#[from] ServiceError),
    #[error(transparent)]
    Response(#[from] ResponseError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Extracted {
    pub triples: Vec<Triple>,
    pub warnings: Vec<ElementWarning>,
}

pub trait Extractor: Sync {
    fn extract(&self, excerpt: &Excerpt) -> Result<Extracted, ExtractError>;

    /// Whether identical input always yields identical output.
    fn is_deterministic(&self) -> bool;
}

pub struct OfflineExtractor {
    pub gazetteer: Gazetteer,
}

impl Extractor for OfflineExtractor {
    fn extract(&self, excerpt: &Excerpt) -> Result<Extracted, ExtractError> {
        Ok(Extracted { triples: extract_offline(excerpt, &self.gazetteer), warnings: Vec::new() })
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

pub struct ServiceExtractor {
    pub client: CompletionClient,
    pub template: PromptTemplate,
    pub policy: InvalidPolicy,
}

impl Extractor for ServiceExtractor {
    fn extract(&self, excerpt: &Excerpt) -> Result<Extracted, ExtractError> {
        let prompt = build_prompt(excerpt, &self.template);
        let text = self.client.request_completion(&prompt)?;
        let parsed = parse_extraction_response(&text, &excerpt.id, self.policy)?;
        Ok(Extracted { triples: parsed.triples, warnings: parsed.warnings })
    }

    fn is_deterministic(&self) -> bool {
        false
    }
}

pub trait TripleSink {
    fn accept(&mut self, excerpt: &Excerpt, triples: &[Triple]) -> io::Result<()>;
}

impl TripleSink for Vec<Triple> {
    fn accept(&mut self, _excerpt: &Excerpt, triples: &[Triple]) -> io::Result<()> {
        self.extend_from_slice(triples);
        Ok(())
    }
}

/// Writes one JSON object per triple.
pub struct JsonlSink<W: Write>(pub W);

impl<W: Write> TripleSink for JsonlSink<W> {
    fn accept(&mut self, _excerpt: &Excerpt, triples: &[Triple]) -> io::Result<()> {
        for t in triples {
            serde_json::to_writer(&mut self.0, t)?;
            self.0.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BatchSummary {
    pub ok: usize,
    pub failed: usize,
    pub triples: usize,
    pub warnings: usize,
    /// `(excerpt_id, error message)` in input order.
    pub failures: Vec<(String, String)>,
}

/// Runs `extractor` over `excerpts` on up to `parallelism` worker threads.
///
/// Per-excerpt failures are recorded in the summary and never stop the
/// batch. The sink sees excerpts strictly in input order; a sink error stops
/// scheduling and is returned.
pub fn extract_batch<S: TripleSink>(
    excerpts: &[Excerpt],
    extractor: &dyn Extractor,
    parallelism: usize,
    sink: &mut S,
) -> io::Result<BatchSummary> {
    let workers = parallelism.max(1).min(excerpts.len().max(1));
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let mut summary = BatchSummary::default();

    std::thread::scope(|scope| -> io::Result<()> {
        let (tx, rx) = mpsc::channel::<(usize, Result<Extracted, ExtractError>)>();
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, abort) = (&next, &abort);
            scope.spawn(move || loop {
                if abort.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(excerpt) = excerpts.get(i) else { break };
                if tx.send((i, extractor.extract(excerpt))).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut pending = BTreeMap::new();
        let mut emit_at = 0;
        for (i, result) in rx {
            pending.insert(i, result);
            while let Some(result) = pending.remove(&emit_at) {
                let excerpt = &excerpts[emit_at];
                match result {
                    Ok(extracted) => {
                        if let Err(e) = sink.accept(excerpt, &extracted.triples) {
                            abort.store(true, Ordering::Relaxed);
                            return Err(e);
                        }
                        summary.ok += 1;
                        summary.triples += extracted.triples.len();
                        summary.warnings += extracted.warnings.len();
                        for w in &extracted.warnings {
                            log::warn!("{}: {w}", excerpt.id);
                        }
                    }
                    Err(e) => {
                        log::warn!("{}: extraction failed: {e}", excerpt.id);
                        summary.failed += 1;
                        summary.failures.push((excerpt.id.clone(), e.to_string()));
                    }
                }
                emit_at += 1;
            }
        }
        Ok(())
    })?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{EntityType, RelationType};
    use std::time::Duration;

    fn excerpts(n: usize) -> Vec<Excerpt> {
        (0..n)
            .map(|i| Excerpt {
                id: format!("d#{i}"),
                doc_id: "d".into(),
                text: format!("Probe {i} orbits the Moon."),
                term: "Moon".into(),
                word_count: 5,
                gold_label: None,
            })
            .collect()
    }

    /// Sleeps inversely to index so later items finish first.
    struct Jittery;

    impl Extractor for Jittery {
        fn extract(&self, excerpt: &Excerpt) -> Result<Extracted, ExtractError> {
            let i: u64 = excerpt.id.trim_start_matches("d#").parse().unwrap();
            std::thread::sleep(Duration::from_millis((20 - i % 20) * 2));
            if i % 7 == 3 {
                return Err(ServiceError::Timeout.into());
            }
            let t = Triple::new(
                format!("Probe {i}"),
                EntityType::Spacecraft,
                RelationType::Studies,
                "Moon",
                EntityType::CelestialObject,
                &excerpt.id,
            )
            .unwrap();
            Ok(Extracted { triples: vec![t], warnings: vec![] })
        }

        fn is_deterministic(&self) -> bool {
            true
        }
    }

    fn run(parallelism: usize) -> (BatchSummary, Vec<u8>) {
        let mut sink = JsonlSink(Vec::new());
        let summary = extract_batch(&excerpts(20), &Jittery, parallelism, &mut sink).unwrap();
        (summary, sink.0)
    }

    #[test]
    fn output_independent_of_parallelism() {
        let (s1, bytes1) = run(1);
        let (s4, bytes4) = run(4);
        assert_eq!(s1, s4);
        assert_eq!(bytes1, bytes4);
        assert_eq!(s1.failed, 3);
        assert_eq!(s1.ok, 17);
        assert_eq!(s1.failures[0].0, "d#3");
    }

    #[test]
    fn offline_batch_in_input_order() {
        let gaz = Gazetteer::from_tsv("Moon\tcelestialObject\tshared\nProbe\tspacecraft\tx\n".as_bytes()).unwrap();
        let mut out: Vec<Triple> = Vec::new();
        let s = extract_batch(&excerpts(3), &OfflineExtractor { gazetteer: gaz }, 2, &mut out).unwrap();
        assert_eq!((s.ok, s.failed, s.triples), (3, 0, 3));
        let ids: Vec<_> = out.iter().map(|t| t.excerpt_id.as_str()).collect();
        assert_eq!(ids, ["d#0", "d#1", "d#2"]);
    }

    #[test]
    fn permanent_service_failure_is_counted() {
        let client = CompletionClient::new(
            ExtractorConfig {
                endpoint_url: "http://127.0.0.1:9/none".into(),
                max_attempts: 1,
                request_timeout: Duration::from_millis(200),
                ..ExtractorConfig::default()
            },
            "k",
        );
        let ext = ServiceExtractor { client, template: PromptTemplate::few_shot(), policy: InvalidPolicy::DropInvalid };
        let mut out: Vec<Triple> = Vec::new();
        let s = extract_batch(&excerpts(1), &ext, 1, &mut out).unwrap();
        assert_eq!((s.ok, s.failed), (0, 1));
    }

    struct FailingSink;

    impl TripleSink for FailingSink {
        fn accept(&mut self, _: &Excerpt, _: &[Triple]) -> io::Result<()> {
            Err(io::Error::other("disk full"))
        }
    }

    #[test]
    fn sink_error_aborts() {
        let err = extract_batch(&excerpts(5), &Jittery, 2, &mut FailingSink).unwrap_err();
        assert_eq!(err.to_string(), "disk full");
    }

    #[test]
    fn empty_batch() {
        let mut out: Vec<Triple> = Vec::new();
        let s = extract_batch(&[], &Jittery, 4, &mut out).unwrap();
        assert_eq!(s, BatchSummary::default());
    }
}
