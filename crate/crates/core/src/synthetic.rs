//! Deterministic two-context corpus where one ambiguous term names both a
//! lunar crater and a crewed mission programme.
//!
//! Each context has its own gazetteer vocabulary; two forms are shared. Crater
//! documents never use mission query keywords and mission documents never
//! use "crater" or "basin", so query-based gold labels are unambiguous.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::Document;
use crate::extraction::{Gazetteer, GazetteerEntry};
use crate::schema::EntityType;

pub const TERM: &str = "Apollo";

const CRATER_FORMS: &[(&str, EntityType)] = &[
    ("South Pole-Aitken basin", EntityType::CelestialObjectRegion),
    ("Oresme crater", EntityType::PlanetaryNomenclature),
    ("Chebyshev crater", EntityType::PlanetaryNomenclature),
    ("Dryden crater", EntityType::PlanetaryNomenclature),
    ("Barringer crater", EntityType::PlanetaryNomenclature),
    ("peak ring", EntityType::PlanetaryNomenclature),
    ("mare basalt", EntityType::Data),
    ("impact melt", EntityType::Data),
    ("far side", EntityType::CelestialRegion),
    ("Nectarian", EntityType::Period),
    ("Lunar Orbiter Laser Altimeter", EntityType::Instrument),
    ("gravity anomaly", EntityType::Measure),
];

const MISSION_FORMS: &[(&str, EntityType)] = &[
    ("Saturn V", EntityType::Spacecraft),
    ("Command Module", EntityType::Spacecraft),
    ("Lunar Module", EntityType::Spacecraft),
    ("Apollo 11", EntityType::Mission),
    ("Apollo 15", EntityType::Mission),
    ("Apollo 17", EntityType::Mission),
    ("Tranquility Base", EntityType::PlanetaryNomenclature),
    ("Hadley Rille", EntityType::PlanetaryNomenclature),
    ("Passive Seismic Experiment", EntityType::Instrument),
    ("laser retroreflector", EntityType::Instrument),
    ("lunar rover", EntityType::Spacecraft),
    ("splashdown", EntityType::Research),
];

const SHARED_FORMS: &[(&str, EntityType)] = &[("Moon", EntityType::CelestialObject), ("regolith", EntityType::Data)];

const CRATER_SENTENCES: &[&str] = &[
    "The Apollo basin lies within {a} and overlaps {b}.",
    "Ejecta from the Apollo impact cover {a} near {b}.",
    "Crater counts on {a} suggest that {b} formed before the Apollo basin.",
    "Maps of {a} show that the floor of Apollo hosts {b}.",
    "Within the Apollo crater, {a} is cut by {b}.",
    "Topography of {a} and {b} constrains the depth of Apollo.",
    "The inner ring of Apollo exposes {a} beside {b}.",
];

const MISSION_SENTENCES: &[&str] = &[
    "During the Apollo programme the crew deployed {a} beside {b}.",
    "The {a} carried Apollo astronauts toward {b}.",
    "Apollo flight controllers tracked {a} and {b}.",
    "Samples returned by Apollo astronauts link {a} with {b}.",
    "After launch, the Apollo crew checked {a} against {b}.",
    "Astronauts trained with {a} before the Apollo landing near {b}.",
    "The Apollo launch schedule paired {a} with {b}.",
];

const FILLER: &[&str] = &[
    "Further analysis is ongoing.",
    "These results agree with earlier surveys.",
    "The data set is publicly archived.",
    "Uncertainties remain large.",
];

/// Keywords that identify mission documents, one per line in the fixture.
pub const MISSION_KEYWORDS: &[&str] = &["crew", "astronauts", "launch", "Saturn V", "Apollo 11", "Apollo 15", "Apollo 17"];

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub documents: Vec<Document>,
    pub gazetteer: Gazetteer,
}

fn pick<'a>(rng: &mut ChaCha8Rng, own: &'a [(&'a str, EntityType)]) -> (&'a str, &'a str) {
    let pool: Vec<&str> = if rng.gen_bool(0.15) {
        own.iter().chain(SHARED_FORMS).map(|f| f.0).collect()
    } else {
        own.iter().map(|f| f.0).collect()
    };
    let mut two = pool.choose_multiple(rng, 2);
    (two.next().expect("pool has two forms"), two.next().expect("pool has two forms"))
}

fn body(rng: &mut ChaCha8Rng, templates: &[&str], forms: &[(&str, EntityType)], sentences: usize) -> String {
    let mut parts = Vec::new();
    for _ in 0..sentences {
        let (a, b) = pick(rng, forms);
        let template = templates.choose(rng).expect("templates non-empty");
        parts.push(template.replace("{a}", a).replace("{b}", b));
        if rng.gen_bool(0.3) {
            parts.push(FILLER.choose(rng).expect("filler non-empty").to_string());
        }
    }
    parts.join(" ")
}

/// `per_context` documents for each context plus a few unrelated ones,
/// interleaved in a seeded order.
pub fn generate(seed: u64, per_context: usize) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut documents = Vec::new();
    for i in 0..per_context {
        let n = rng.gen_range(4..=7);
        documents.push(Document {
            id: format!("crater-{i:03}"),
            title: format!("Geology of the Apollo basin, part {i}"),
            body: body(&mut rng, CRATER_SENTENCES, CRATER_FORMS, n),
            tags: Default::default(),
        });
        let n = rng.gen_range(4..=7);
        documents.push(Document {
            id: format!("mission-{i:03}"),
            title: format!("Apollo flight report {i}"),
            body: body(&mut rng, MISSION_SENTENCES, MISSION_FORMS, n),
            tags: Default::default(),
        });
    }
    for i in 0..4 {
        documents.push(Document {
            id: format!("other-{i:03}"),
            title: "Unrelated".into(),
            body: "Mars rovers study the regolith of Gale crater. The Moon is not discussed here.".into(),
            tags: Default::default(),
        });
    }
    documents.shuffle(&mut rng);

    let entry = |(form, etype): &(&str, EntityType), label: &str| GazetteerEntry {
        surface_form: form.to_string(),
        entity_type: *etype,
        context_label: label.to_string(),
    };
    let entries = CRATER_FORMS
        .iter()
        .map(|f| entry(f, "crater"))
        .chain(MISSION_FORMS.iter().map(|f| entry(f, "mission")))
        .chain(SHARED_FORMS.iter().map(|f| entry(f, "shared")))
        .collect();
    SyntheticCorpus { documents, gazetteer: Gazetteer::new(entries).expect("fixture forms are distinct") }
}

pub fn corpus_jsonl(docs: &[Document]) -> String {
    #[derive(Serialize)]
    struct Line<'a> {
        id: &'a str,
        title: &'a str,
        body: &'a str,
    }
    docs.iter()
        .map(|d| serde_json::to_string(&Line { id: &d.id, title: &d.title, body: &d.body }).expect("serializes") + "\n")
        .collect()
}

pub fn missions_txt() -> String {
    let mut out = String::from("# mission-context keywords\n");
    for k in MISSION_KEYWORDS {
        out.push_str(k);
        out.push('\n');
    }
    out
}

pub const CONFIG: &str = "\
# Synthetic two-context fixture
corpus = corpus.jsonl
term = Apollo
max_words = 40
query.crater.all_of = Apollo
query.crater.any_of = crater, basin
query.mission.all_of = Apollo
query.mission.any_of_file = apollo_missions.txt
gazetteer = gazetteer.tsv
extractor.mode = offline
leiden.quality = modularity
leiden.resolution = 1
leiden.seed = 42
holdout.fraction = 0.2
holdout.seed = 7
out = out
eval.positive = crater
eval.negative = mission
";

/// Writes corpus.jsonl, gazetteer.tsv, apollo_missions.txt and config.txt.
pub fn write_fixture(dir: &std::path::Path, seed: u64, per_context: usize) -> std::io::Result<()> {
    let c = generate(seed, per_context);
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("corpus.jsonl"), corpus_jsonl(&c.documents))?;
    std::fs::write(dir.join("gazetteer.tsv"), c.gazetteer.to_tsv())?;
    std::fs::write(dir.join("apollo_missions.txt"), missions_txt())?;
    std::fs::write(dir.join("config.txt"), CONFIG)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{contains_word, find_whole_word};

    #[test]
    fn contexts_do_not_leak_keywords() {
        let c = generate(1, 30);
        for d in &c.documents {
            let crater_words = contains_word(&d.body, "crater") || contains_word(&d.body, "basin");
            let mission_words = MISSION_KEYWORDS.iter().any(|k| contains_word(&d.body, k));
            if d.id.starts_with("crater") {
                assert!(crater_words && !mission_words, "{}", d.body);
            } else if d.id.starts_with("mission") {
                assert!(mission_words && !crater_words, "{}", d.body);
            } else {
                assert!(find_whole_word(&d.body, TERM).is_empty());
            }
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(generate(5, 10).documents, generate(5, 10).documents);
        assert_ne!(corpus_jsonl(&generate(5, 10).documents), corpus_jsonl(&generate(6, 10).documents));
    }
}
