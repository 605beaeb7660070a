use crate::kgraph::KnowledgeGraph;

/// Compact weighted undirected graph the optimizer works on.
///
/// `self_weight[i]` holds edge weight internal to node `i` (non-zero only
/// after aggregation); `node_size[i]` counts the original nodes folded into
/// `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub(crate) neighbors: Vec<Vec<(usize, f64)>>,
    pub(crate) self_weight: Vec<f64>,
    pub(crate) node_size: Vec<f64>,
    pub(crate) degree: Vec<f64>,
    pub(crate) total_weight: f64,
}

impl Network {
    /// Builds a network from undirected `(u, v, weight)` edges. Parallel
    /// edges are summed; self-loops are added to the node's internal weight.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut neighbors: Vec<Vec<(usize, f64)>> = vec![Vec::new(); node_count];
        let mut self_weight = vec![0.0; node_count];
        for &(u, v, w) in edges {
            assert!(u < node_count && v < node_count, "edge ({u}, {v}) out of range");
            assert!(w > 0.0 && w.is_finite(), "edge weights must be positive");
            if u == v {
                self_weight[u] += w;
            } else {
                neighbors[u].push((v, w));
                neighbors[v].push((u, w));
            }
        }
        for list in &mut neighbors {
            list.sort_by_key(|&(n, _)| n);
            list.dedup_by(|next, kept| {
                if next.0 == kept.0 {
                    kept.1 += next.1;
                    true
                } else {
                    false
                }
            });
        }
        Network::assemble(neighbors, self_weight, vec![1.0; node_count])
    }

    fn assemble(neighbors: Vec<Vec<(usize, f64)>>, self_weight: Vec<f64>, node_size: Vec<f64>) -> Self {
        let degree: Vec<f64> = neighbors
            .iter()
            .zip(&self_weight)
            .map(|(list, s)| list.iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * s)
            .collect();
        let total_weight = degree.iter().sum::<f64>() / 2.0;
        Network { neighbors, self_weight, node_size, degree, total_weight }
    }

    pub fn node_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn degree(&self, node: usize) -> f64 {
        self.degree[node]
    }

    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.neighbors[node]
    }

    /// Collapses each group of `membership` (dense ids `0..groups`) into one node.
    pub(crate) fn aggregate(&self, membership: &[usize], groups: usize) -> Network {
        let mut self_weight = vec![0.0; groups];
        let mut node_size = vec![0.0; groups];
        let mut neighbors: Vec<Vec<(usize, f64)>> = vec![Vec::new(); groups];
        let mut slot = vec![usize::MAX; groups];
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); groups];
        for (node, &g) in membership.iter().enumerate() {
            members[g].push(node);
            self_weight[g] += self.self_weight[node];
            node_size[g] += self.node_size[node];
        }
        for g in 0..groups {
            let mut list: Vec<(usize, f64)> = Vec::new();
            for &node in &members[g] {
                for &(other, w) in &self.neighbors[node] {
                    let h = membership[other];
                    if h == g {
                        // Each internal edge is seen from both endpoints.
                        self_weight[g] += w / 2.0;
                    } else if slot[h] == usize::MAX {
                        slot[h] = list.len();
                        list.push((h, w));
                    } else {
                        list[slot[h]].1 += w;
                    }
                }
            }
            for &(h, _) in &list {
                slot[h] = usize::MAX;
            }
            list.sort_by_key(|&(h, _)| h);
            neighbors[g] = list;
        }
        Network::assemble(neighbors, self_weight, node_size)
    }
}

impl From<&KnowledgeGraph> for Network {
    fn from(g: &KnowledgeGraph) -> Self {
        let edges: Vec<(usize, usize, f64)> = g.edges.iter().map(|e| (e.u, e.v, e.weight as f64)).collect();
        Network::from_edges(g.node_count(), &edges)
    }
}
