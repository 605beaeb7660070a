//! One PASS/FAIL line per acceptance criterion.
//!
//! Runs without the libtest harness so the lines always reach stdout.
//! Criteria listed in `KNOWN_FAILURES` are expected to fail; the process exits
//! non-zero if any other criterion fails or if a known failure starts passing.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use common::leiden_oracle::*;
use kg_disambig::corpus::{extract_excerpts, split_sentences, word_count, Document, ExcerptOptions, WordMatcher};
use kg_disambig::evalkit::{derive_metrics, ConfusionMatrix2};
use kg_disambig::extraction::{build_prompt, parse_extraction_response, InvalidPolicy, PromptTemplate};
use kg_disambig::leiden::{network_quality, run_on_network, validate_partition, LeidenParams, Network, QualityFunction};
use kg_disambig::pipeline::{Pipeline, PartitionFile, RunConfig, PARTITION, PROFILES, METRICS};
use kg_disambig::schema::{vocabulary_json, EntityType as E, RelationType as R};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const KNOWN_FAILURES: &[&str] = &["metric reproduction"];

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn metric_reproduction() -> Outcome {
    let m = derive_metrics(&ConfusionMatrix2::new("crater", "mission", [1159, 293, 391, 418])).map_err(|e| e.to_string())?;
    let pairs = [
        ("accuracy", Some(m.accuracy), 69.76),
        ("crater precision", m.positive.precision, 74.77),
        ("crater recall", m.positive.recall, 79.82),
        ("crater f1", m.positive.f1, 77.21),
        ("mission precision", m.negative.precision, 58.78),
        ("mission recall", m.negative.recall, 51.67),
        ("mission f1", m.negative.f1, 55.05),
    ];
    let off: Vec<String> = pairs
        .iter()
        .filter(|(_, got, want)| got.is_none_or(|g| (g - want).abs() > 0.02))
        .map(|(name, got, want)| format!("{name} {:.4} vs {want}", got.unwrap_or(f64::NAN)))
        .collect();
    if off.is_empty() {
        Ok("all seven values within 0.02".into())
    } else {
        Err(off.join("; "))
    }
}

fn small_graph(seed: u64, max_nodes: usize) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_nodes);
    Network::from_edges(n, &random_edges(&mut rng, n))
}

fn leiden_correctness() -> Outcome {
    let started = Instant::now();
    let params = |quality, resolution, seed| LeidenParams { quality, resolution, seed, ..LeidenParams::default() };
    for seed in 0..200u64 {
        let net = small_graph(seed, 64);
        let p = params(QualityFunction::Modularity, 1.0, seed);
        let r = run_on_network(&net, &p).map_err(|e| e.to_string())?;
        check(all_connected(&net, &r.partition.assignment), || format!("(a) disconnected community, graph {seed}"))?;
        for w in r.trace.windows(2) {
            check(w[1].quality >= w[0].quality - 1e-12, || format!("(b) quality decreased, graph {seed}"))?;
        }
    }
    let mut small = 0;
    for seed in 0..300u64 {
        let net = small_graph(seed, 8);
        for (q, res) in [(QualityFunction::Modularity, 1.0), (QualityFunction::Cpm, 0.5)] {
            let p = params(q, res, seed);
            let got = run_on_network(&net, &p).map_err(|e| e.to_string())?.partition;
            let best = exhaustive_optimum(&net, &p);
            let ok = got.quality_value >= best - 1e-9 || is_local_optimum(&net, &got.assignment, &p, 1e-9);
            check(ok, || format!("(c) graph {seed} {q}: {} vs optimum {best}", got.quality_value))?;
            small += 1;
        }
    }
    let mut edges = Vec::new();
    for base in [0, 4] {
        for i in 0..4 {
            for j in i + 1..4 {
                edges.push((base + i, base + j, 1.0));
            }
        }
    }
    edges.push((3, 4, 1.0));
    let net = Network::from_edges(8, &edges);
    let got = run_on_network(&net, &params(QualityFunction::Modularity, 1.0, 0)).map_err(|e| e.to_string())?.partition;
    check(got.communities == vec![vec![0, 1, 2, 3], vec![4, 5, 6, 7]], || format!("(d) got {:?}", got.communities))?;
    let q = network_quality(&net, &got.assignment, &params(QualityFunction::Modularity, 1.0, 0));
    let elapsed = started.elapsed().as_secs_f64();
    check(elapsed < 60.0, || format!("took {elapsed:.1}s"))?;
    Ok(format!("200 connectivity graphs, {small} exhaustive checks, two-clique quality {q:.4}, {elapsed:.2}s"))
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic")
}

fn fixture_pipeline(out: &Path, seed: Option<u64>) -> Result<Pipeline, String> {
    let mut cfg = RunConfig::load(&fixture_dir().join("config.txt")).map_err(|e| e.to_string())?;
    cfg.out = out.to_path_buf();
    if let Some(s) = seed {
        cfg.leiden.seed = s;
    }
    Pipeline::new(cfg).map_err(|e| e.to_string())
}

/// Every artifact's bytes, with manifest timings zeroed.
fn snapshot(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        let mut bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
        if name == "manifest.json" {
            let mut v: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| e.to_string())?;
            for stage in v["stages"].as_object_mut().into_iter().flat_map(|m| m.values_mut()) {
                stage["elapsed_ms"] = 0.into();
            }
            bytes = serde_json::to_vec(&v).unwrap();
        }
        out.insert(name, bytes);
    }
    Ok(out)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = tmp.path().join("out");
    let p = fixture_pipeline(&out, None)?;
    p.run_all().map_err(|e| e.to_string())?;
    let first = snapshot(&out)?;
    std::fs::remove_dir_all(&out).map_err(|e| e.to_string())?;
    p.run_all().map_err(|e| e.to_string())?;
    let second = snapshot(&out)?;
    check(first.contains_key(PARTITION), || "no partition artifact".into())?;
    let differing: Vec<&String> = first.keys().filter(|k| first.get(*k) != second.get(*k)).collect();
    check(differing.is_empty() && first.len() == second.len(), || format!("differing artifacts: {differing:?}"))?;

    let graph_nodes = {
        let text = std::fs::read_to_string(out.join("graph.json")).map_err(|e| e.to_string())?;
        kg_disambig::kgraph::import_json(&text).map_err(|e| e.to_string())?.node_count()
    };
    let mut distinct = std::collections::BTreeSet::new();
    for seed in [1, 2, 3, 5, 8, 13, 21] {
        let dir = tmp.path().join(format!("seed{seed}"));
        let p = fixture_pipeline(&dir, Some(seed))?;
        std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
        std::fs::copy(out.join("graph.json"), dir.join("graph.json")).map_err(|e| e.to_string())?;
        p.cluster().map_err(|e| e.to_string())?;
        let file: PartitionFile = serde_json::from_slice(&std::fs::read(dir.join(PARTITION)).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let part = file.partition().map_err(|e| e.to_string())?;
        validate_partition(graph_nodes, &part).map_err(|e| format!("seed {seed}: {e}"))?;
        distinct.insert(file.assignment);
    }
    Ok(format!("{} artifacts identical; 7 seeds valid, {} distinct partitions", first.len(), distinct.len()))
}

fn end_to_end() -> Outcome {
    let started = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = tmp.path().join("out");
    let p = fixture_pipeline(&out, None)?;
    let outcomes = p.run_all().map_err(|e| e.to_string())?;
    let excerpts = outcomes[0].summary["excerpts"].as_u64().unwrap_or(0);
    check(excerpts >= 200, || format!("only {excerpts} excerpts"))?;
    check((p.config.holdout_fraction - 0.2).abs() < 1e-12, || "holdout is not 20%".into())?;

    let read = |name: &str| -> Result<serde_json::Value, String> {
        serde_json::from_slice(&std::fs::read(out.join(name)).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
    };
    let metrics = read(METRICS)?;
    let accuracy = metrics["excerpt"]["metrics"]["accuracy"].as_f64().ok_or("no accuracy")?;
    let tested = metrics["excerpt"]["tally"]["matrix"]["pos_pos"].as_u64().unwrap_or(0)
        + metrics["excerpt"]["tally"]["matrix"]["pos_neg"].as_u64().unwrap_or(0)
        + metrics["excerpt"]["tally"]["matrix"]["neg_pos"].as_u64().unwrap_or(0)
        + metrics["excerpt"]["tally"]["matrix"]["neg_neg"].as_u64().unwrap_or(0);
    let profiles = read(PROFILES)?;
    let labels: Vec<&str> = profiles["profiles"]
        .as_array()
        .ok_or("no profiles")?
        .iter()
        .filter_map(|c| c["assigned_label"].as_str())
        .filter(|l| *l == "crater" || *l == "mission")
        .collect();
    let elapsed = started.elapsed().as_secs_f64();
    check(accuracy >= 90.0, || format!("holdout accuracy {accuracy:.2}%"))?;
    check(labels.contains(&"crater") && labels.contains(&"mission"), || format!("community labels {labels:?}"))?;
    check(elapsed < 30.0, || format!("took {elapsed:.1}s"))?;
    Ok(format!(
        "{excerpts} excerpts, {tested} scored holdout excerpts, accuracy {accuracy:.2}%, labeled communities {labels:?}, {elapsed:.2}s"
    ))
}

fn block_keys(block: &str) -> Vec<String> {
    block
        .lines()
        .filter_map(|l| l.trim().strip_prefix('"'))
        .filter_map(|l| l.split_once('"').map(|(k, _)| k.to_string()))
        .collect()
}

fn prompt_fidelity() -> Outcome {
    let golden = include_str!("golden/prompt_probe.txt");
    let probe = include_str!("golden/probe_excerpt.txt");
    let excerpt = kg_disambig::corpus::Excerpt {
        id: "probe#0".into(),
        doc_id: "probe".into(),
        text: probe.into(),
        term: "Apollo".into(),
        word_count: word_count(probe),
        gold_label: None,
    };
    let built = build_prompt(&excerpt, &PromptTemplate::few_shot());
    check(built == golden, || {
        let at = built.bytes().zip(golden.bytes()).position(|(a, b)| a != b).unwrap_or(built.len().min(golden.len()));
        format!("prompt differs from golden at byte {at}")
    })?;

    let entity_block = golden.split("# ENTITY TYPES:").nth(1).and_then(|s| s.split('}').next()).ok_or("no entity block")?;
    let relation_block =
        golden.split("Use the following relation types:").nth(1).and_then(|s| s.split('}').next()).ok_or("no relation block")?;
    let vocab = vocabulary_json();
    let vocab_keys = |field: &str| -> Vec<String> { vocab[field].as_object().unwrap().keys().cloned().collect() };
    let (entities, relations) = (block_keys(entity_block), block_keys(relation_block));
    check(entities == vocab_keys("entity_types"), || format!("entity block {entities:?}"))?;
    check(relations == vocab_keys("relation_types"), || format!("relation block {relations:?}"))?;
    for (block, field) in [(entity_block, "entity_types"), (relation_block, "relation_types")] {
        for (name, uri) in vocab[field].as_object().unwrap() {
            let line = format!("\"{name}\": {uri},");
            check(block.contains(&line), || format!("missing `{line}`"))?;
        }
    }
    Ok(format!("{} bytes identical; {} entity and {} relation entries", built.len(), entities.len(), relations.len()))
}

type Expected = (&'static str, E, R, &'static str, E);

const EXAMPLE_1: &[Expected] = &[
    ("Apollo", E::Spacecraft, R::Discovery, "small craters present a greater danger to landing vehicles", E::CelestialObjectRegion),
    ("Surveyor", E::Spacecraft, R::Discovery, "small craters present a greater danger to landing vehicles", E::CelestialObjectRegion),
    ("Apollo", E::Spacecraft, R::Studies, "Moon", E::CelestialObject),
    ("Surveyor", E::Spacecraft, R::Studies, "Moon", E::CelestialObject),
    ("Copernican units", E::Period, R::MeasuredAs, "lunar surface", E::CelestialObjectRegion),
    ("Moon", E::CelestialObject, R::HasChild, "lunar poles", E::CelestialObjectRegion),
    ("Moon", E::CelestialObject, R::HasChild, "lunar surface", E::CelestialObjectRegion),
    ("lunar surface", E::CelestialObjectRegion, R::DescribedBy, "craters smaller than 100 m in diameter", E::CelestialObject),
    (
        "lunar landing site",
        E::CelestialObjectRegion,
        R::DescribedBy,
        "many craters, presenting a sub-horizontal surface at the scale of any lander",
        E::CelestialRegion,
    ),
    ("blocks", E::CelestialRegion, R::LocatedIn, "areas away from fresh craters", E::CelestialRegion),
];

const EXAMPLE_2: &[Expected] = &[
    ("Basilevsky et al. (2013)", E::Research, R::StatedIn, "high-resolution images from LROC", E::Data),
    ("high-resolution images", E::Data, R::Creator, "Lunar Reconnaissance Orbiter Camera (LROC)", E::Instrument),
    ("Apollo craters", E::PlanetaryNomenclature, R::HasChild, "ejecta deposits", E::CelestialRegion),
    ("number density of boulders >2 m", E::Measure, R::LocatedIn, "ejecta deposits of craters", E::CelestialRegion),
    ("number density of boulders >2 m", E::Measure, R::HasCause, "absolute crater-formation age(s)", E::Measure),
    ("meter-scale boulders", E::CelestialObject, R::LocatedIn, "ejecta deposits", E::CelestialRegion),
    ("ejecta deposits", E::CelestialRegion, R::HasChild, "Apollo craters", E::PlanetaryNomenclature),
    (
        "ejecta deposits",
        E::CelestialRegion,
        R::HasChild,
        "craters of intermediate or more advanced degradational state and relative age",
        E::CelestialObject,
    ),
];

fn output_block(template: &str, example: usize) -> Option<&str> {
    let start = format!("--> Beginning of example {example}");
    let section = template.split(&start).nth(1)?.split("--> End of example").next()?;
    section.split("# Output").nth(1)
}

fn parser_fidelity() -> Outcome {
    let template = PromptTemplate::few_shot();
    let mut counts = Vec::new();
    for (n, expected) in [(1, EXAMPLE_1), (2, EXAMPLE_2)] {
        let block = output_block(template.text(), n).ok_or_else(|| format!("example {n} output block not found"))?;
        let parsed = parse_extraction_response(block, "example", InvalidPolicy::Fail).map_err(|e| format!("example {n}: {e}"))?;
        check(parsed.warnings.is_empty(), || format!("example {n} warnings {:?}", parsed.warnings))?;
        let got: Vec<(&str, E, R, &str, E)> =
            parsed.triples.iter().map(|t| (t.head.as_str(), t.head_type, t.relation, t.tail.as_str(), t.tail_type)).collect();
        check(got == expected, || format!("example {n}: got {got:?}"))?;
        counts.push(got.len());
    }
    Ok(format!("example 1 -> {} triples, example 2 -> {} triples", counts[0], counts[1]))
}

const WORDS: &[&str] = &[
    "the", "crater", "rim", "Apollo", "basin", "ejecta", "Dr.", "Fig.", "e.g.", "3.5", "km", "Apollonius", "apollo",
    "(Apollo)", "Apollo's", "mare", "U.S.", "melt", "floor", "APOLLO", "pre-Apollo", "Apollo-based",
];

fn fuzz_document(rng: &mut ChaCha8Rng, id: usize) -> Document {
    let mut sentences = Vec::new();
    for _ in 0..rng.gen_range(1..12) {
        let len = rng.gen_range(1..60);
        let mut words: Vec<&str> = (0..len).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect();
        words[0] = ["The", "Apollo", "Its", "A"][rng.gen_range(0..4)];
        let end = ["." , "!", "?", ".\"", ")."][rng.gen_range(0..5)];
        sentences.push(format!("{}{end}", words.join(" ")));
    }
    let sep = if rng.gen_bool(0.2) { "\n\n" } else { " " };
    Document { id: format!("f{id}"), title: String::new(), body: sentences.join(sep), tags: Default::default() }
}

fn excerpting_contract() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let term = WordMatcher::new("Apollo").ok_or("empty term")?;
    let (mut docs, mut total) = (0, 0);
    for id in 0..500 {
        let doc = fuzz_document(&mut rng, id);
        let max_words = [256, 256, 40, 80][id % 4];
        let report =
            extract_excerpts(&doc, "Apollo", ExcerptOptions { max_words, dedup: false }).map_err(|e| e.to_string())?;
        let occurrences = term.find_all(&doc.body).len();
        check(report.excerpts.len() + report.skipped_overlong == occurrences, || {
            format!("{}: {} excerpts + {} skipped vs {occurrences} occurrences", doc.id, report.excerpts.len(), report.skipped_overlong)
        })?;
        check(max_words < 60 || report.skipped_overlong == 0, || format!("{}: skipped a short sentence", doc.id))?;
        let sentences = split_sentences(&doc.body);
        for (e, span) in report.excerpts.iter().zip(&report.spans) {
            check(e.word_count <= max_words && e.word_count <= 256 && word_count(&e.text) == e.word_count, || {
                format!("{}: {} words", e.id, e.word_count)
            })?;
            check(sentences.iter().any(|s| s.start == span.start) && sentences.iter().any(|s| s.end == span.end), || {
                format!("{}: span {span:?} cuts a sentence", e.id)
            })?;
            check(&doc.body[span.clone()] == e.text, || format!("{}: text does not match span", e.id))?;
            check(term.is_match(&e.text), || format!("{}: term missing", e.id))?;
        }
        docs += 1;
        total += report.excerpts.len();
    }
    Ok(format!("{docs} fuzz documents, {total} excerpts"))
}

fn main() -> std::process::ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("metric reproduction", metric_reproduction),
        ("leiden correctness", leiden_correctness),
        ("determinism", determinism),
        ("end-to-end synthetic disambiguation", end_to_end),
        ("prompt fidelity", prompt_fidelity),
        ("parser fidelity", parser_fidelity),
        ("excerpting contract", excerpting_contract),
    ];
    let mut unexpected = Vec::new();
    for (name, run) in criteria {
        let started = Instant::now();
        let outcome = run();
        let secs = started.elapsed().as_secs_f64();
        match &outcome {
            Ok(detail) => println!("PASS {name} ({secs:.2}s): {detail}"),
            Err(detail) => println!("FAIL {name} ({secs:.2}s): {detail}"),
        }
        if outcome.is_ok() == KNOWN_FAILURES.contains(&name) {
            unexpected.push(name);
        }
    }
    if unexpected.is_empty() {
        std::process::ExitCode::SUCCESS
    } else {
        eprintln!("criteria with unexpected outcome: {unexpected:?}");
        std::process::ExitCode::FAILURE
    }
}
