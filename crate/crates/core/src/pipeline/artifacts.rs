//! Self-describing artifact files and the run manifest.
//!
//! JSONL artifacts open with a `{"_meta": {...}}` line, CSV artifacts with a
//! `# {...}` comment line, and JSON artifacts carry a leading `"meta"` field.
//! Timings live only in the manifest, so artifacts of a deterministic run are
//! byte-identical across reruns.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;

pub const TOOL: &str = concat!("kg-disambig ", env!("CARGO_PKG_VERSION"));
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub stage: String,
    pub tool: String,
    pub config_digest: String,
}

impl ArtifactMeta {
    pub fn new(stage: &str, config_digest: &str) -> Self {
        ArtifactMeta { stage: stage.into(), tool: TOOL.into(), config_digest: config_digest.into() }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<String, PipelineError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    std::fs::write(path, bytes).map_err(io_err(path))?;
    Ok(sha256_hex(bytes))
}

/// Reads a predecessor artifact, naming the stage that produces it if absent.
pub fn read_input(path: &Path, producer: &'static str) -> Result<Vec<u8>, PipelineError> {
    match std::fs::read(path) {
        Ok(bytes) => Ok(bytes),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            Err(PipelineError::MissingArtifact { path: path.to_path_buf(), stage: producer })
        }
        Err(source) => Err(PipelineError::Io { path: path.to_path_buf(), source }),
    }
}

fn malformed(path: &Path, message: impl ToString) -> PipelineError {
    PipelineError::Artifact { path: path.to_path_buf(), message: message.to_string() }
}

pub fn jsonl_bytes<T: Serialize>(meta: &ArtifactMeta, items: &[T]) -> Vec<u8> {
    let mut out = serde_json::to_vec(&serde_json::json!({ "_meta": meta })).expect("meta serializes");
    out.push(b'\n');
    for item in items {
        serde_json::to_writer(&mut out, item).expect("record serializes");
        out.push(b'\n');
    }
    out
}

pub fn parse_jsonl<T: DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<Vec<T>, PipelineError> {
    let text = std::str::from_utf8(bytes).map_err(|e| malformed(path, e))?;
    let mut items = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() || (idx == 0 && line.starts_with("{\"_meta\"")) {
            continue;
        }
        items.push(serde_json::from_str(line).map_err(|e| malformed(path, format!("line {}: {e}", idx + 1)))?);
    }
    Ok(items)
}

/// Pretty JSON object with `meta` first, then the fields of `body`.
pub fn json_bytes<T: Serialize>(meta: &ArtifactMeta, body: &T) -> Vec<u8> {
    let mut map = serde_json::Map::new();
    map.insert("meta".into(), serde_json::to_value(meta).expect("meta serializes"));
    match serde_json::to_value(body).expect("body serializes") {
        serde_json::Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("data".into(), other);
        }
    }
    let mut out = serde_json::to_vec_pretty(&serde_json::Value::Object(map)).expect("json serializes");
    out.push(b'\n');
    out
}

pub fn parse_json<T: DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<T, PipelineError> {
    serde_json::from_slice(bytes).map_err(|e| malformed(path, e))
}

pub fn csv_bytes<R: Serialize>(meta: &ArtifactMeta, rows: &[R]) -> Result<Vec<u8>, PipelineError> {
    let mut out = format!("# {}\n", serde_json::to_string(meta).expect("meta serializes")).into_bytes();
    let mut w = csv::Writer::from_writer(&mut out);
    for r in rows {
        w.serialize(r).map_err(|e| malformed(Path::new("<csv>"), e))?;
    }
    w.flush().map_err(|e| malformed(Path::new("<csv>"), e))?;
    drop(w);
    Ok(out)
}

pub fn parse_csv<R: DeserializeOwned>(path: &Path, bytes: &[u8]) -> Result<Vec<R>, PipelineError> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(bytes);
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| malformed(path, format!("row {}: {e}", i + 1))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    /// File name → sha256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub elapsed_ms: u64,
    pub deterministic: bool,
    pub summary: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub config_digest: String,
    /// Canonical config text.
    pub config: String,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Manifest {
    pub fn path(out_dir: &Path) -> PathBuf {
        out_dir.join(MANIFEST)
    }

    /// Loads the manifest in `out_dir`, or starts a fresh one if it is absent
    /// or belongs to a different config.
    pub fn open(out_dir: &Path, config_text: &str) -> Result<Self, PipelineError> {
        let digest = sha256_hex(config_text.as_bytes());
        let path = Manifest::path(out_dir);
        if let Ok(bytes) = std::fs::read(&path) {
            let m: Manifest = parse_json(&path, &bytes)?;
            if m.config_digest == digest {
                return Ok(m);
            }
        }
        Ok(Manifest {
            tool_version: TOOL.into(),
            config_digest: digest,
            config: config_text.into(),
            stages: BTreeMap::new(),
        })
    }

    pub fn save(&self, out_dir: &Path) -> Result<(), PipelineError> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("manifest serializes");
        bytes.push(b'\n');
        write_file(&Manifest::path(out_dir), &bytes).map(|_| ())
    }
}
