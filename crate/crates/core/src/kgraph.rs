//! Weighted undirected knowledge graph built from extracted triples.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{EntityType, RelationType, Triple};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("malformed graph JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("graph is inconsistent: {0}")]
    Inconsistent(String),
}

/// Trim, collapse internal whitespace, lowercase.
pub fn normalize_label(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeKey {
    pub label_norm: String,
    pub entity_type: EntityType,
}

impl NodeKey {
    pub fn new(label: &str, entity_type: EntityType) -> Self {
        NodeKey { label_norm: normalize_label(label), entity_type }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub key: NodeKey,
    /// Observed surface label → occurrence count.
    pub surface_forms: BTreeMap<String, usize>,
    pub gold_counts: BTreeMap<String, usize>,
}

impl Node {
    /// Most frequent surface form, lexicographically smallest on ties.
    pub fn display_label(&self) -> &str {
        self.surface_forms
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(s, _)| s.as_str())
            .unwrap_or(&self.key.label_norm)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    /// Relation multiplicities over every triple collapsed into this edge.
    pub relations: BTreeMap<RelationType, usize>,
    pub weight: u64,
    pub provenance: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    #[serde(default)]
    pub dropped_self_loops: usize,
    #[serde(skip)]
    adjacency: Vec<Vec<(usize, u64)>>,
    #[serde(skip)]
    index: HashMap<NodeKey, usize>,
}

impl KnowledgeGraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_id(&self, key: &NodeKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// `(neighbor, weight)` pairs for `node`.
    pub fn neighbors(&self, node: usize) -> &[(usize, u64)] {
        &self.adjacency[node]
    }

    pub fn weighted_degree(&self, node: usize) -> u64 {
        self.adjacency[node].iter().map(|&(_, w)| w).sum()
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    fn rebuild_indices(&mut self) -> Result<(), GraphError> {
        self.index.clear();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.id != i {
                return Err(GraphError::Inconsistent(format!("node at position {i} has id {}", n.id)));
            }
            if self.index.insert(n.key.clone(), i).is_some() {
                return Err(GraphError::Inconsistent(format!("duplicate node key {:?}", n.key)));
            }
        }
        self.adjacency = vec![Vec::new(); self.nodes.len()];
        for e in &self.edges {
            if e.u >= e.v || e.v >= self.nodes.len() {
                return Err(GraphError::Inconsistent(format!("edge ({}, {}) is not canonical", e.u, e.v)));
            }
            self.adjacency[e.u].push((e.v, e.weight));
            self.adjacency[e.v].push((e.u, e.weight));
        }
        Ok(())
    }

    fn intern(&mut self, label: &str, entity_type: EntityType) -> usize {
        let key = NodeKey::new(label, entity_type);
        if let Some(&id) = self.index.get(&key) {
            *self.nodes[id].surface_forms.entry(label.to_string()).or_default() += 1;
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            id,
            key: key.clone(),
            surface_forms: BTreeMap::from([(label.to_string(), 1)]),
            gold_counts: BTreeMap::new(),
        });
        self.index.insert(key, id);
        id
    }
}

/// Builds the graph: one node per `(normalized label, type)`, one edge per
/// unordered node pair. Node ids follow first appearance in `triples`.
/// Self-referential triples are counted in `dropped_self_loops` only.
pub fn build_graph(triples: &[Triple], gold: &HashMap<String, String>) -> KnowledgeGraph {
    let mut g = KnowledgeGraph::default();
    let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triples {
        let h = g.intern(&t.head, t.head_type);
        let tl = g.intern(&t.tail, t.tail_type);
        if let Some(label) = gold.get(&t.excerpt_id) {
            *g.nodes[h].gold_counts.entry(label.clone()).or_default() += 1;
            if tl != h {
                *g.nodes[tl].gold_counts.entry(label.clone()).or_default() += 1;
            }
        }
        if h == tl {
            g.dropped_self_loops += 1;
            continue;
        }
        let (u, v) = if h < tl { (h, tl) } else { (tl, h) };
        let idx = *edge_index.entry((u, v)).or_insert_with(|| {
            g.edges.push(Edge { u, v, relations: BTreeMap::new(), weight: 0, provenance: Vec::new() });
            g.edges.len() - 1
        });
        let e = &mut g.edges[idx];
        *e.relations.entry(t.relation).or_default() += 1;
        e.weight += 1;
        e.provenance.push(t.excerpt_id.clone());
    }
    g.rebuild_indices().expect("construction keeps indices consistent");
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    GraphMl,
    Dot,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "graphml" => Ok(ExportFormat::GraphMl),
            "dot" => Ok(ExportFormat::Dot),
            "json" => Ok(ExportFormat::Json),
            other => Err(format!("unknown export format `{other}`")),
        }
    }
}

pub fn export_graph(g: &KnowledgeGraph, format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Json => export_json(g).into_bytes(),
        ExportFormat::Dot => export_dot(g).into_bytes(),
        ExportFormat::GraphMl => export_graphml(g).into_bytes(),
    }
}

pub fn export_json(g: &KnowledgeGraph) -> String {
    serde_json::to_string_pretty(g).expect("graph serializes")
}

pub fn import_json(text: &str) -> Result<KnowledgeGraph, GraphError> {
    let mut g: KnowledgeGraph = serde_json::from_str(text)?;
    g.rebuild_indices()?;
    Ok(g)
}

fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n")
}

fn relation_summary(e: &Edge) -> String {
    e.relations.iter().map(|(r, n)| format!("{r}:{n}")).collect::<Vec<_>>().join(",")
}

fn export_dot(g: &KnowledgeGraph) -> String {
    let mut out = String::from("graph kg {\n");
    for n in &g.nodes {
        let _ = writeln!(
            out,
            "  n{} [label=\"{}\", etype=\"{}\"];",
            n.id,
            dot_escape(n.display_label()),
            n.key.entity_type
        );
    }
    for e in &g.edges {
        let _ = writeln!(
            out,
            "  n{} -- n{} [weight={}, relations=\"{}\"];",
            e.u,
            e.v,
            e.weight,
            relation_summary(e)
        );
    }
    out.push_str("}\n");
    out
}

fn export_graphml(g: &KnowledgeGraph) -> String {
    let mut out = String::from(concat!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n",
        "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n",
        "  <key id=\"label\" for=\"node\" attr.name=\"label\" attr.type=\"string\"/>\n",
        "  <key id=\"etype\" for=\"node\" attr.name=\"etype\" attr.type=\"string\"/>\n",
        "  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"long\"/>\n",
        "  <key id=\"relations\" for=\"edge\" attr.name=\"relations\" attr.type=\"string\"/>\n",
        "  <graph id=\"kg\" edgedefault=\"undirected\">\n",
    ));
    for n in &g.nodes {
        let _ = writeln!(
            out,
            "    <node id=\"n{}\"><data key=\"label\">{}</data><data key=\"etype\">{}</data></node>",
            n.id,
            xml_escape(n.display_label()),
            n.key.entity_type
        );
    }
    for (i, e) in g.edges.iter().enumerate() {
        let _ = writeln!(
            out,
            "    <edge id=\"e{i}\" source=\"n{}\" target=\"n{}\"><data key=\"weight\">{}</data><data key=\"relations\">{}</data></edge>",
            e.u,
            e.v,
            e.weight,
            relation_summary(e)
        );
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}
