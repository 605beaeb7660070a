//! Community labeling from gold tallies, and excerpt classification by
//! percentage of association with each community.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::kgraph::{KnowledgeGraph, Node, NodeKey};
use crate::leiden::{validate_partition, LeidenError, Partition};
use crate::schema::Triple;

/// Label of a community with no labeled members.
pub const UNLABELED: &str = "unlabeled";
/// Prediction for an excerpt none of whose entities are in the graph.
pub const UNKNOWN: &str = "unknown";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommunityProfile {
    pub community: usize,
    /// Percentage of labeled member nodes per label.
    pub label_distribution: BTreeMap<String, f64>,
    pub assigned_label: String,
    pub member_count: usize,
    pub labeled_members: usize,
    /// Two or more labels shared the top percentage.
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationResult {
    pub excerpt_id: String,
    /// Percentage of matched entities per community id.
    pub scores: BTreeMap<usize, f64>,
    pub matched_entities: usize,
    pub total_entities: usize,
    pub top_community: Option<usize>,
    pub predicted_label: Option<String>,
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub excerpt_id: String,
    pub predicted_label: String,
    pub top_score: f64,
    pub matched: usize,
    pub total: usize,
}

/// Majority gold label of a node, lexicographically smallest on ties.
pub fn node_label(node: &Node) -> Option<&str> {
    node.gold_counts
        .iter()
        .filter(|(_, &n)| n > 0)
        .fold(None, |best: Option<(&String, usize)>, (label, &n)| match best {
            Some((_, m)) if m >= n => best,
            _ => Some((label, n)),
        })
        .map(|(label, _)| label.as_str())
}

/// Argmax over `(key, value)` pairs in ascending key order; first key wins ties.
fn argmax<K: Clone>(items: impl IntoIterator<Item = (K, f64)>) -> Option<(K, f64, bool)> {
    let mut best: Option<(K, f64, bool)> = None;
    for (k, v) in items {
        match &mut best {
            Some((_, top, tie)) if v == *top => *tie = true,
            Some((_, top, _)) if v < *top => {}
            _ => best = Some((k, v, false)),
        }
    }
    best
}

pub fn profile_communities(g: &KnowledgeGraph, p: &Partition) -> Result<Vec<CommunityProfile>, LeidenError> {
    validate_partition(g.node_count(), p)?;
    Ok(p.communities
        .iter()
        .enumerate()
        .map(|(community, members)| {
            let mut tally: BTreeMap<String, usize> = BTreeMap::new();
            for &node in members {
                if let Some(label) = node_label(&g.nodes[node]) {
                    *tally.entry(label.to_string()).or_default() += 1;
                }
            }
            let labeled: usize = tally.values().sum();
            let label_distribution: BTreeMap<String, f64> =
                tally.into_iter().map(|(l, n)| (l, 100.0 * n as f64 / labeled as f64)).collect();
            let (assigned_label, tie) = match argmax(label_distribution.iter().map(|(l, &v)| (l.clone(), v))) {
                Some((label, _, tie)) => (label, tie),
                None => (UNLABELED.to_string(), false),
            };
            CommunityProfile {
                community,
                label_distribution,
                assigned_label,
                member_count: members.len(),
                labeled_members: labeled,
                tie,
            }
        })
        .collect())
}

/// Distinct entity keys mentioned as head or tail.
pub fn entity_keys(triples: &[Triple]) -> BTreeSet<NodeKey> {
    triples
        .iter()
        .flat_map(|t| [NodeKey::new(&t.head, t.head_type), NodeKey::new(&t.tail, t.tail_type)])
        .collect()
}

pub fn associate(
    excerpt_id: &str,
    triples: &[Triple],
    g: &KnowledgeGraph,
    p: &Partition,
    profiles: &[CommunityProfile],
) -> AssociationResult {
    let keys = entity_keys(triples);
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for key in &keys {
        if let Some(node) = g.node_id(key) {
            *counts.entry(p.community_of(node)).or_default() += 1;
        }
    }
    let matched: usize = counts.values().sum();
    let scores: BTreeMap<usize, f64> =
        counts.into_iter().map(|(c, n)| (c, 100.0 * n as f64 / matched as f64)).collect();
    let top = argmax(scores.iter().map(|(&c, &v)| (c, v)));
    AssociationResult {
        excerpt_id: excerpt_id.to_string(),
        matched_entities: matched,
        total_entities: keys.len(),
        top_community: top.as_ref().map(|t| t.0),
        predicted_label: top.as_ref().map(|t| profiles[t.0].assigned_label.clone()),
        tie: top.is_some_and(|t| t.2),
        scores,
    }
}

/// One row per excerpt, in input order. Unmatched excerpts get [`UNKNOWN`].
pub fn classify_batch<'a>(
    batch: impl IntoIterator<Item = (&'a str, &'a [Triple])>,
    g: &KnowledgeGraph,
    p: &Partition,
    profiles: &[CommunityProfile],
) -> Vec<Classification> {
    batch
        .into_iter()
        .map(|(id, triples)| {
            let a = associate(id, triples, g, p, profiles);
            Classification {
                excerpt_id: a.excerpt_id,
                top_score: a.top_community.map_or(0.0, |c| a.scores[&c]),
                predicted_label: a.predicted_label.unwrap_or_else(|| UNKNOWN.to_string()),
                matched: a.matched_entities,
                total: a.total_entities,
            }
        })
        .collect()
}

/// Entity-level predictions: the community label of every distinct matched
/// entity of an excerpt, in key order.
pub fn entity_predictions(
    triples: &[Triple],
    g: &KnowledgeGraph,
    p: &Partition,
    profiles: &[CommunityProfile],
) -> Vec<(NodeKey, String)> {
    entity_keys(triples)
        .into_iter()
        .filter_map(|key| {
            let node = g.node_id(&key)?;
            Some((key, profiles[p.community_of(node)].assigned_label.clone()))
        })
        .collect()
}
