//! Local moving and refinement phases.
//!
//! Both phases maximize `Σ_c [w_in(c) − r·S_c²/2]`, where `S_c` sums a per-node
//! weight (degree for modularity, original node count for CPM). Callers pick
//! `node_weight` and `r` so this raw objective is an affine image of the
//! requested quality function.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::network::Network;

pub(crate) struct Objective<'a> {
    pub node_weight: &'a [f64],
    pub resolution: f64,
    /// Raw gain → quality units, used to scale the refinement randomness.
    pub scale: f64,
    /// Minimum raw gain for a local move to count as an improvement.
    pub tolerance: f64,
}

/// Relabels community ids to `0..k` in order of first appearance.
pub(crate) fn relabel(membership: &mut [usize]) -> usize {
    let mut map = vec![usize::MAX; membership.len().max(membership.iter().copied().max().map_or(0, |m| m + 1))];
    let mut next = 0;
    for c in membership.iter_mut() {
        if map[*c] == usize::MAX {
            map[*c] = next;
            next += 1;
        }
        *c = map[*c];
    }
    next
}

/// Queue-based local moving. `membership` ids must be `< node_count`.
/// Returns whether any node changed community.
pub(crate) fn move_nodes_fast(net: &Network, membership: &mut [usize], obj: &Objective, rng: &mut ChaCha8Rng) -> bool {
    let n = net.node_count();
    let s = obj.node_weight;
    let mut comm_weight = vec![0.0; n];
    let mut comm_nodes = vec![0usize; n];
    for (v, &c) in membership.iter().enumerate() {
        comm_weight[c] += s[v];
        comm_nodes[c] += 1;
    }
    // Popped from the back, so the smallest free id is offered first.
    let mut free: Vec<usize> = (0..n).rev().filter(|&c| comm_nodes[c] == 0).collect();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut queue: VecDeque<usize> = order.into();
    let mut queued = vec![true; n];

    let mut link = vec![0.0; n];
    let mut touched = vec![false; n];
    let mut seen: Vec<usize> = Vec::new();
    let mut changed = false;

    while let Some(v) = queue.pop_front() {
        queued[v] = false;
        let current = membership[v];
        for &(u, w) in net.neighbors(v) {
            let c = membership[u];
            if !touched[c] {
                touched[c] = true;
                seen.push(c);
            }
            link[c] += w;
        }

        comm_weight[current] -= s[v];
        comm_nodes[current] -= 1;
        let empty = if comm_nodes[current] == 0 { Some(current) } else { free.last().copied() };

        let gain = |c: usize| link[c] - obj.resolution * s[v] * comm_weight[c];
        let stay_gain = gain(current);
        let mut best = current;
        let mut best_gain = stay_gain;
        let candidates = seen.iter().copied().chain(empty);
        for c in candidates {
            let g = gain(c);
            if g > best_gain || (g == best_gain && c < best) {
                best = c;
                best_gain = g;
            }
        }
        if best != current && best_gain <= stay_gain + obj.tolerance {
            best = current;
        }

        comm_weight[best] += s[v];
        comm_nodes[best] += 1;
        if best != current {
            membership[v] = best;
            changed = true;
            if free.last() == Some(&best) {
                free.pop();
            }
            if comm_nodes[current] == 0 {
                free.push(current);
            }
            for &(u, _) in net.neighbors(v) {
                if !queued[u] && membership[u] != best {
                    queued[u] = true;
                    queue.push_back(u);
                }
            }
        }

        for c in seen.drain(..) {
            link[c] = 0.0;
            touched[c] = false;
        }
    }
    changed
}

/// Splits every community of `membership` (dense ids) into well-connected
/// subcommunities by merging singletons, with θ-randomized target choice.
/// Returns the dense refined membership and its group count.
pub(crate) fn refine(
    net: &Network,
    membership: &[usize],
    obj: &Objective,
    randomness: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<usize>, usize) {
    let n = net.node_count();
    let s = obj.node_weight;
    let r = obj.resolution;
    let communities = membership.iter().copied().max().map_or(0, |m| m + 1);
    let mut comm_total = vec![0.0; communities];
    for v in 0..n {
        comm_total[membership[v]] += s[v];
    }

    let mut refined: Vec<usize> = (0..n).collect();
    let mut sub_weight = s.to_vec();
    let mut sub_nodes = vec![1usize; n];
    // Edge weight from each subcommunity to the rest of its parent community.
    let mut sub_external: Vec<f64> = (0..n)
        .map(|v| {
            net.neighbors(v)
                .iter()
                .filter(|&&(u, _)| membership[u] == membership[v])
                .map(|&(_, w)| w)
                .sum()
        })
        .collect();
    let node_external = sub_external.clone();

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut link = vec![0.0; n];
    let mut touched = vec![false; n];
    let mut seen: Vec<usize> = Vec::new();
    let mut options: Vec<(usize, f64)> = Vec::new();

    for v in order {
        let own = refined[v];
        if sub_nodes[own] != 1 {
            continue;
        }
        let parent = membership[v];
        if node_external[v] < r * s[v] * (comm_total[parent] - s[v]) {
            continue;
        }
        for &(u, w) in net.neighbors(v) {
            if membership[u] != parent {
                continue;
            }
            let sc = refined[u];
            if !touched[sc] {
                touched[sc] = true;
                seen.push(sc);
            }
            link[sc] += w;
        }

        options.clear();
        options.push((own, 0.0));
        for &sc in &seen {
            let well_connected = sub_external[sc] >= r * sub_weight[sc] * (comm_total[parent] - sub_weight[sc]);
            let gain = link[sc] - r * s[v] * sub_weight[sc];
            if well_connected && gain >= 0.0 {
                options.push((sc, gain));
            }
        }

        let target = choose(&options, randomness, obj.scale, rng);
        if target != own {
            refined[v] = target;
            sub_weight[own] = 0.0;
            sub_nodes[own] = 0;
            sub_weight[target] += s[v];
            sub_nodes[target] += 1;
            sub_external[target] += node_external[v] - 2.0 * link[target];
        }

        for c in seen.drain(..) {
            link[c] = 0.0;
            touched[c] = false;
        }
    }
    let groups = relabel(&mut refined);
    (refined, groups)
}

/// θ = 0: highest gain, lowest id on ties. Otherwise samples with
/// probability ∝ exp(gain·scale/θ).
fn choose(options: &[(usize, f64)], randomness: f64, scale: f64, rng: &mut ChaCha8Rng) -> usize {
    let greedy = || {
        options
            .iter()
            .copied()
            .reduce(|a, b| if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) { b } else { a })
            .map(|(c, _)| c)
            .expect("options always holds the node's own subcommunity")
    };
    if randomness <= 0.0 || options.len() == 1 {
        return greedy();
    }
    let max_gain = options.iter().map(|o| o.1).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = options.iter().map(|o| ((o.1 - max_gain) * scale / randomness).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut draw = rng.gen::<f64>() * total;
    for (o, w) in options.iter().zip(&weights) {
        if draw < *w {
            return o.0;
        }
        draw -= w;
    }
    greedy()
}
