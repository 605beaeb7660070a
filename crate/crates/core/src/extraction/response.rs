//! Lenient parsing of model output into validated triples.
//!
//! Accepted deviations from strict JSON: a surrounding code fence, doubled
//! `{{`/`}}` object braces as printed in the prompt examples, and trailing
//! commas before a closing bracket or brace.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::schema::{EntityType, RelationType, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidPolicy {
    #[default]
    DropInvalid,
    Fail,
}

impl std::str::FromStr for InvalidPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "drop_invalid" => Ok(InvalidPolicy::DropInvalid),
            "fail" => Ok(InvalidPolicy::Fail),
            other => Err(format!("unknown invalid-element policy `{other}`")),
        }
    }
}

impl std::fmt::Display for InvalidPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            InvalidPolicy::DropInvalid => "drop_invalid",
            InvalidPolicy::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementWarning {
    pub index: usize,
    pub reason: String,
}

impl std::fmt::Display for ElementWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "element {}: {}", self.index, self.reason)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ResponseError {
    #[error("unparseable response at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("invalid element {}: {}", .0.index, .0.reason)]
    InvalidElement(ElementWarning),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedResponse {
    pub triples: Vec<Triple>,
    pub warnings: Vec<ElementWarning>,
}

/// Removes an optional surrounding ``` fence, returning the byte offset of
/// the kept slice within `text`.
fn strip_fence(text: &str) -> (usize, &str) {
    let lead = text.len() - text.trim_start().len();
    let body = text.trim();
    if !body.starts_with("```") {
        return (lead, body);
    }
    let after_open = body.find('\n').map_or(body.len(), |i| i + 1);
    let mut inner = &body[after_open..];
    if let Some(close) = inner.rfind("```") {
        if inner[close + 3..].trim().is_empty() {
            inner = &inner[..close];
        }
    }
    (lead + after_open, inner)
}

/// Normalized JSON text plus, for each output byte, its source byte offset.
fn normalize(text: &str) -> (String, Vec<usize>) {
    let bytes = text.as_bytes();
    let doubled = has_doubled_braces(bytes);
    let mut out = Vec::with_capacity(bytes.len());
    let mut map = Vec::with_capacity(bytes.len());
    let mut i = 0;
    let mut in_string = false;
    while i < bytes.len() {
        let b = bytes[i];
        if in_string {
            out.push(b);
            map.push(i);
            if b == b'\\' && i + 1 < bytes.len() {
                out.push(bytes[i + 1]);
                map.push(i + 1);
                i += 2;
                continue;
            }
            if b == b'"' {
                in_string = false;
            }
            i += 1;
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' | b'}' if doubled && bytes.get(i + 1) == Some(&b) => {
                out.push(b);
                map.push(i);
                i += 2;
                continue;
            }
            b',' => {
                let next = bytes[i + 1..].iter().position(|c| !c.is_ascii_whitespace()).map(|p| bytes[i + 1 + p]);
                if matches!(next, Some(b']') | Some(b'}')) {
                    i += 1;
                    continue;
                }
            }
            _ => {}
        }
        out.push(b);
        map.push(i);
        i += 1;
    }
    map.push(bytes.len());
    // Only whole ASCII bytes were dropped, so UTF-8 sequences stay intact.
    (String::from_utf8(out).expect("ascii-only edits preserve utf-8"), map)
}

fn has_doubled_braces(bytes: &[u8]) -> bool {
    let mut in_string = false;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' if in_string => i += 1,
            b'"' => in_string = !in_string,
            b'{' if !in_string && bytes.get(i + 1) == Some(&b'{') => return true,
            _ => {}
        }
        i += 1;
    }
    false
}

fn line_col_to_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

fn string_field(obj: &serde_json::Map<String, Value>, key: &str) -> Result<String, String> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(format!("field `{key}` is not a string")),
        None => Err(format!("missing field `{key}`")),
    }
}

fn element_to_triple(value: &Value, excerpt_id: &str) -> Result<Triple, String> {
    let obj = value.as_object().ok_or_else(|| "element is not an object".to_string())?;
    let head = string_field(obj, "head")?;
    let head_type: EntityType = string_field(obj, "head_type")?.parse().map_err(|e| format!("{e}"))?;
    let relation: RelationType = string_field(obj, "relation")?.parse().map_err(|e| format!("{e}"))?;
    let tail = string_field(obj, "tail")?;
    let tail_type: EntityType = string_field(obj, "tail_type")?.parse().map_err(|e| format!("{e}"))?;
    Triple::new(head, head_type, relation, tail, tail_type, excerpt_id).map_err(|e| e.to_string())
}

pub fn parse_extraction_response(
    text: &str,
    excerpt_id: &str,
    policy: InvalidPolicy,
) -> Result<ParsedResponse, ResponseError> {
    let (base, body) = strip_fence(text);
    let (normalized, map) = normalize(body);
    let value: Value = serde_json::from_str(&normalized).map_err(|e| {
        let at = line_col_to_offset(&normalized, e.line(), e.column());
        ResponseError::Syntax { offset: base + map[at.min(map.len() - 1)], message: e.to_string() }
    })?;
    let Value::Array(elements) = value else {
        return Err(ResponseError::Syntax { offset: base, message: "expected a JSON array of triples".into() });
    };
    let mut parsed = ParsedResponse::default();
    for (index, element) in elements.iter().enumerate() {
        match element_to_triple(element, excerpt_id) {
            Ok(t) => parsed.triples.push(t),
            Err(reason) => {
                let warning = ElementWarning { index, reason };
                if policy == InvalidPolicy::Fail {
                    return Err(ResponseError::InvalidElement(warning));
                }
                parsed.warnings.push(warning);
            }
        }
    }
    Ok(parsed)
}

#[derive(Serialize)]
struct OutputElement<'a> {
    head: &'a str,
    head_type: EntityType,
    relation: RelationType,
    tail: &'a str,
    tail_type: EntityType,
}

/// Renders triples in the model's output shape (no excerpt ids).
pub fn format_triples(triples: &[Triple]) -> String {
    let elements: Vec<OutputElement<'_>> = triples
        .iter()
        .map(|t| OutputElement {
            head: &t.head,
            head_type: t.head_type,
            relation: t.relation,
            tail: &t.tail,
            tail_type: t.tail_type,
        })
        .collect();
    serde_json::to_string_pretty(&elements).expect("triples serialize")
}
