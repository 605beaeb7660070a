//! Leiden community detection (local moving, refinement, aggregation) with
//! modularity or constant Potts model quality.
//!
//! Randomness comes only from a [`ChaCha8Rng`] seeded with
//! [`LeidenParams::seed`]: node visiting order in both phases, and the
//! θ-weighted choice of merge target during refinement. A fixed graph, params
//! and seed always produce the same partition.

mod network;
mod optimizer;

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use network::Network;

use crate::kgraph::KnowledgeGraph;
use optimizer::{move_nodes_fast, refine, relabel, Objective};

#[derive(Debug, Error, PartialEq)]
pub enum LeidenError {
    #[error("partition covers {got} nodes, graph has {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("community ids are not dense: id {0} is empty")]
    EmptyCommunity(usize),
    #[error("invalid parameters: {0}")]
    Params(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityFunction {
    #[default]
    Modularity,
    Cpm,
}

impl std::str::FromStr for QualityFunction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "modularity" => Ok(QualityFunction::Modularity),
            "cpm" => Ok(QualityFunction::Cpm),
            other => Err(format!("unknown quality function `{other}`")),
        }
    }
}

impl std::fmt::Display for QualityFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QualityFunction::Modularity => "modularity",
            QualityFunction::Cpm => "cpm",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeidenParams {
    pub quality: QualityFunction,
    /// γ
    pub resolution: f64,
    /// θ, in quality units per unit of total edge weight. Zero makes the
    /// refinement greedy.
    pub randomness: f64,
    pub seed: u64,
    pub max_iterations: usize,
    pub min_quality_gain: f64,
}

impl Default for LeidenParams {
    fn default() -> Self {
        LeidenParams {
            quality: QualityFunction::Modularity,
            resolution: 1.0,
            randomness: 0.01,
            seed: 0,
            max_iterations: 10,
            min_quality_gain: 1e-10,
        }
    }
}

impl LeidenParams {
    pub fn validate(&self) -> Result<(), LeidenError> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(LeidenError::Params("resolution must be positive".into()));
        }
        if !(self.randomness >= 0.0 && self.randomness.is_finite()) {
            return Err(LeidenError::Params("randomness must be non-negative".into()));
        }
        if self.max_iterations == 0 {
            return Err(LeidenError::Params("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Community id per node id.
    pub assignment: Vec<usize>,
    pub communities: Vec<Vec<usize>>,
    pub quality_value: f64,
}

impl Partition {
    /// Validates dense, non-empty community ids. `quality_value` is left at 0.
    pub fn from_assignment(assignment: Vec<usize>) -> Result<Self, LeidenError> {
        let count = assignment.iter().copied().max().map_or(0, |m| m + 1);
        let mut communities = vec![Vec::new(); count];
        for (node, &c) in assignment.iter().enumerate() {
            communities[c].push(node);
        }
        if let Some(empty) = communities.iter().position(Vec::is_empty) {
            return Err(LeidenError::EmptyCommunity(empty));
        }
        Ok(Partition { assignment, communities, quality_value: 0.0 })
    }

    pub fn singletons(n: usize) -> Self {
        Partition::from_assignment((0..n).collect()).expect("singletons are dense")
    }

    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn community_count(&self) -> usize {
        self.communities.len()
    }

    pub fn community_of(&self, node: usize) -> usize {
        self.assignment[node]
    }
}

pub fn community_sizes(p: &Partition) -> Vec<usize> {
    p.communities.iter().map(Vec::len).collect()
}

fn node_weights(net: &Network, quality: QualityFunction) -> Vec<f64> {
    match quality {
        QualityFunction::Modularity => net.degree.clone(),
        QualityFunction::Cpm => net.node_size.clone(),
    }
}

fn raw_resolution(net: &Network, params: &LeidenParams) -> f64 {
    match params.quality {
        QualityFunction::Modularity => params.resolution / (2.0 * net.total_weight),
        QualityFunction::Cpm => params.resolution,
    }
}

/// Quality of `membership` on `net`, computed in one pass over the edges.
///
/// Modularity: `Σ_c [w_in(c)/W − γ·(K_c/2W)²]`.
/// CPM: `Σ_c [w_in(c) − γ·n_c(n_c−1)/2]`.
pub fn network_quality(net: &Network, membership: &[usize], params: &LeidenParams) -> f64 {
    let count = membership.iter().copied().max().map_or(0, |m| m + 1);
    let mut internal = vec![0.0; count];
    let mut weight = vec![0.0; count];
    let mut size = vec![0.0; count];
    for v in 0..net.node_count() {
        let c = membership[v];
        internal[c] += net.self_weight[v];
        weight[c] += net.degree[v];
        size[c] += net.node_size[v];
        for &(u, w) in net.neighbors(v) {
            if u > v && membership[u] == c {
                internal[c] += w;
            }
        }
    }
    let gamma = params.resolution;
    match params.quality {
        QualityFunction::Modularity => {
            let total = net.total_weight;
            if total == 0.0 {
                return 0.0;
            }
            (0..count).map(|c| internal[c] / total - gamma * (weight[c] / (2.0 * total)).powi(2)).sum()
        }
        QualityFunction::Cpm => (0..count).map(|c| internal[c] - gamma * size[c] * (size[c] - 1.0) / 2.0).sum(),
    }
}

/// Quality of a partition of a knowledge graph.
pub fn quality(g: &KnowledgeGraph, p: &Partition, params: &LeidenParams) -> Result<f64, LeidenError> {
    validate_partition(g.node_count(), p)?;
    Ok(network_quality(&Network::from(g), &p.assignment, params))
}

pub fn validate_partition(node_count: usize, p: &Partition) -> Result<(), LeidenError> {
    if p.assignment.len() != node_count {
        return Err(LeidenError::SizeMismatch { expected: node_count, got: p.assignment.len() });
    }
    let fresh = Partition::from_assignment(p.assignment.clone())?;
    if fresh.communities != p.communities {
        return Err(LeidenError::Params("communities do not match assignment".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iteration: usize,
    pub quality: f64,
    pub communities: usize,
    /// Nodes whose community changed relative to the previous iteration.
    pub moved_nodes: usize,
    /// Aggregation levels visited in this iteration.
    pub levels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeidenResult {
    pub partition: Partition,
    pub trace: Vec<IterationTrace>,
}

pub fn run_leiden(g: &KnowledgeGraph, params: &LeidenParams) -> Result<LeidenResult, LeidenError> {
    run_on_network(&Network::from(g), params)
}

/// One full Leiden pass starting from `start`: repeated local moving,
/// refinement and aggregation until local moving leaves every aggregate node
/// in its own community.
fn leiden_pass(base: &Network, start: &[usize], params: &LeidenParams, rng: &mut ChaCha8Rng) -> (Vec<usize>, usize) {
    let r = raw_resolution(base, params);
    let total = base.total_weight;
    let mut owned: Option<Network> = None;
    let mut membership = start.to_vec();
    relabel(&mut membership);
    let mut node_map: Vec<usize> = (0..base.node_count()).collect();
    let mut levels = 0;
    loop {
        let net = owned.as_ref().unwrap_or(base);
        levels += 1;
        let weights = node_weights(net, params.quality);
        let obj = Objective { node_weight: &weights, resolution: r, scale: 1.0 / total, tolerance: 1e-12 * total };
        move_nodes_fast(net, &mut membership, &obj, rng);
        let communities = relabel(&mut membership);
        if communities == net.node_count() {
            break;
        }
        let (refined, groups) = refine(net, &membership, &obj, params.randomness, rng);
        // A refinement that merged nothing would not shrink the network;
        // aggregate by the unrefined partition instead.
        let (collapse, groups) = if groups < net.node_count() { (refined, groups) } else { (membership.clone(), communities) };
        let mut next_membership = vec![0; groups];
        for (v, &g) in collapse.iter().enumerate() {
            next_membership[g] = membership[v];
        }
        let aggregated = net.aggregate(&collapse, groups);
        for slot in node_map.iter_mut() {
            *slot = collapse[*slot];
        }
        membership = next_membership;
        owned = Some(aggregated);
    }
    (node_map.iter().map(|&a| membership[a]).collect(), levels)
}

/// Splits communities that are not connected in `net` into their components.
fn split_disconnected(net: &Network, membership: &mut [usize]) {
    let n = net.node_count();
    let mut component = vec![usize::MAX; n];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        component[start] = next;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            for &(u, _) in net.neighbors(v) {
                if component[u] == usize::MAX && membership[u] == membership[start] {
                    component[u] = next;
                    queue.push_back(u);
                }
            }
        }
        next += 1;
    }
    membership.copy_from_slice(&component);
}

/// Dense ids ordered by community size (descending), then smallest member.
fn canonical(membership: &[usize]) -> Vec<usize> {
    let mut m = membership.to_vec();
    let count = relabel(&mut m);
    let mut sizes = vec![0usize; count];
    for &c in &m {
        sizes[c] += 1;
    }
    // After `relabel`, id order equals smallest-member order.
    let mut order: Vec<usize> = (0..count).collect();
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]).then(a.cmp(&b)));
    let mut rank = vec![0; count];
    for (new, &old) in order.iter().enumerate() {
        rank[old] = new;
    }
    m.iter().map(|&c| rank[c]).collect()
}

pub fn run_on_network(net: &Network, params: &LeidenParams) -> Result<LeidenResult, LeidenError> {
    params.validate()?;
    let n = net.node_count();
    let mut membership: Vec<usize> = (0..n).collect();
    let mut current_quality = network_quality(net, &membership, params);
    let mut trace = Vec::new();
    if n > 0 && net.total_weight > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        for iteration in 1..=params.max_iterations {
            let (mut next, levels) = leiden_pass(net, &membership, params, &mut rng);
            split_disconnected(net, &mut next);
            let next = canonical(&next);
            let moved = moved_nodes(&membership, &next);
            let next_quality = network_quality(net, &next, params);
            debug_assert!(Partition::from_assignment(next.clone()).is_ok());
            debug_assert!(next_quality >= current_quality - 1e-9 * current_quality.abs().max(1.0));
            trace.push(IterationTrace {
                iteration,
                quality: next_quality,
                communities: next.iter().copied().max().map_or(0, |m| m + 1),
                moved_nodes: moved,
                levels,
            });
            let gain = next_quality - current_quality;
            membership = next;
            current_quality = next_quality;
            if moved == 0 || gain < params.min_quality_gain {
                break;
            }
        }
    }
    let mut partition = Partition::from_assignment(canonical(&membership))?;
    partition.quality_value = current_quality;
    Ok(LeidenResult { partition, trace })
}

/// Nodes outside a greedy one-to-one matching of old to new communities by
/// overlap. Zero exactly when both labelings describe the same partition.
fn moved_nodes(before: &[usize], after: &[usize]) -> usize {
    use std::collections::{BTreeMap, BTreeSet};
    let mut overlap: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (&b, &a) in before.iter().zip(after) {
        *overlap.entry((b, a)).or_default() += 1;
    }
    let mut pairs: Vec<((usize, usize), usize)> = overlap.into_iter().collect();
    pairs.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
    let (mut used_before, mut used_after) = (BTreeSet::new(), BTreeSet::new());
    let mut kept = 0;
    for ((b, a), count) in pairs {
        if !used_before.contains(&b) && !used_after.contains(&a) {
            used_before.insert(b);
            used_after.insert(a);
            kept += count;
        }
    }
    before.len() - kept
}
