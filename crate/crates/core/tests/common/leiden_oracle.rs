//! Brute-force helpers for checking Leiden output on small graphs.

use kg_disambig::leiden::{network_quality, LeidenParams, Network};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random graph on `n` nodes: planted blocks plus background noise.
pub fn random_edges(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize, f64)> {
    let blocks = rng.gen_range(1..=4usize);
    let p_in = rng.gen_range(0.2..0.9);
    let p_out = rng.gen_range(0.0..0.15);
    let weighted = rng.gen_bool(0.5);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if u % blocks == v % blocks { p_in } else { p_out };
            if rng.gen_bool(p) {
                let w = if weighted { rng.gen_range(1..=5) as f64 } else { 1.0 };
                edges.push((u, v, w));
            }
        }
    }
    edges
}

pub fn is_connected_within(net: &Network, membership: &[usize], community: usize) -> bool {
    let members: Vec<usize> = (0..membership.len()).filter(|&v| membership[v] == community).collect();
    let Some(&start) = members.first() else { return true };
    let mut seen = vec![false; membership.len()];
    seen[start] = true;
    let mut stack = vec![start];
    let mut reached = 1;
    while let Some(v) = stack.pop() {
        for &(u, _) in net.neighbors(v) {
            if !seen[u] && membership[u] == community {
                seen[u] = true;
                reached += 1;
                stack.push(u);
            }
        }
    }
    reached == members.len()
}

pub fn all_connected(net: &Network, membership: &[usize]) -> bool {
    let count = membership.iter().copied().max().map_or(0, |m| m + 1);
    (0..count).all(|c| is_connected_within(net, membership, c))
}

/// Visits every set partition of `0..n` as a restricted growth string.
pub fn for_each_partition(n: usize, mut visit: impl FnMut(&[usize])) {
    if n == 0 {
        visit(&[]);
        return;
    }
    let mut rgs = vec![0usize; n];
    let mut max_prefix = vec![0usize; n];
    loop {
        visit(&rgs);
        let mut i = n - 1;
        loop {
            if i == 0 {
                return;
            }
            if rgs[i] <= max_prefix[i - 1] {
                rgs[i] += 1;
                break;
            }
            rgs[i] = 0;
            i -= 1;
        }
        for j in i..n {
            max_prefix[j] = max_prefix[j - 1].max(rgs[j]);
        }
    }
}

pub fn exhaustive_optimum(net: &Network, params: &LeidenParams) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for_each_partition(net.node_count(), |m| best = best.max(network_quality(net, m, params)));
    best
}

/// True when no single node can move to another (or a fresh) community for
/// more than `tol` gain.
pub fn is_local_optimum(net: &Network, membership: &[usize], params: &LeidenParams, tol: f64) -> bool {
    let base = network_quality(net, membership, params);
    let fresh = membership.len();
    let mut trial = membership.to_vec();
    for v in 0..membership.len() {
        let original = trial[v];
        for target in (0..membership.len()).chain([fresh]) {
            if target == original {
                continue;
            }
            trial[v] = target;
            if network_quality(net, &dense(&trial), params) > base + tol {
                return false;
            }
        }
        trial[v] = original;
    }
    true
}

fn dense(m: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    m.iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect()
}
