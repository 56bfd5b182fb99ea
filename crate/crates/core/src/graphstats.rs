//! Descriptive statistics of market graphs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corrnet::MarketGraph;

/// Edge count, isolated-node share, degree moments and average clustering.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub node_count: usize,
    pub edge_count: usize,
    pub isolated_fraction: f64,
    pub max_degree: usize,
    pub mean_degree: f64,
    /// Population standard deviation of the degree sequence.
    pub std_degree: f64,
    /// Average local clustering; nodes of degree < 2 count as 0.
    pub clustering_coeff: f64,
}

/// Degree of every node, in asset order.
pub fn degree_sequence(graph: &MarketGraph) -> Vec<usize> {
    let mut deg = vec![0; graph.n_nodes()];
    for e in graph.edges() {
        deg[e.a] += 1;
        deg[e.b] += 1;
    }
    deg
}

/// Local clustering coefficient of every node.
pub fn local_clustering(graph: &MarketGraph) -> Vec<f64> {
    let adj = graph.neighbors();
    adj.iter()
        .map(|nbrs| {
            let d = nbrs.len();
            if d < 2 {
                return 0.0;
            }
            let mut links = 0usize;
            for (i, &u) in nbrs.iter().enumerate() {
                for &v in &nbrs[i + 1..] {
                    if adj[u].binary_search(&v).is_ok() {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (d * (d - 1)) as f64
        })
        .collect()
}

pub fn summarize(graph: &MarketGraph) -> GraphSummary {
    let deg = degree_sequence(graph);
    let n = deg.len();
    if n == 0 {
        return GraphSummary {
            node_count: 0,
            edge_count: 0,
            isolated_fraction: 0.0,
            max_degree: 0,
            mean_degree: 0.0,
            std_degree: 0.0,
            clustering_coeff: 0.0,
        };
    }
    let nf = n as f64;
    let mean = 2.0 * graph.edge_count() as f64 / nf;
    let var = deg.iter().map(|&d| (d as f64 - mean).powi(2)).sum::<f64>() / nf;
    GraphSummary {
        node_count: n,
        edge_count: graph.edge_count(),
        isolated_fraction: deg.iter().filter(|&&d| d == 0).count() as f64 / nf,
        max_degree: deg.iter().copied().max().unwrap_or(0),
        mean_degree: mean,
        std_degree: var.sqrt(),
        clustering_coeff: local_clustering(graph).iter().sum::<f64>() / nf,
    }
}

/// `rank,degree` CSV with degrees sorted descending (rank 1 = highest).
pub fn degree_rank_csv(graph: &MarketGraph) -> String {
    let mut deg = degree_sequence(graph);
    deg.sort_unstable_by(|a, b| b.cmp(a));
    let mut out = String::from("rank,degree\n");
    for (i, d) in deg.iter().enumerate() {
        let _ = writeln!(out, "{},{}", i + 1, d);
    }
    out
}

/// `degree,count` CSV histogram, ascending by degree.
pub fn degree_distribution_csv(graph: &MarketGraph) -> String {
    let mut hist = BTreeMap::new();
    for d in degree_sequence(graph) {
        *hist.entry(d).or_insert(0usize) += 1;
    }
    let mut out = String::from("degree,count\n");
    for (d, c) in hist {
        let _ = writeln!(out, "{d},{c}");
    }
    out
}
