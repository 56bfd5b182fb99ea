//! Correlation networks: Pearson matrix, winner-take-all thresholding and
//! spanning-forest reduction.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::ReturnsMatrix;

/// Population covariance matrix (divisor `T`) of the panel's columns.
///
/// Sums run left to right over rows, so results do not depend on how the
/// caller schedules the work.
pub fn covariance_matrix(panel: &ReturnsMatrix) -> Result<Vec<Vec<f64>>> {
    let t = panel.n_rows();
    if t < 2 {
        return Err(Error::InsufficientData(format!(
            "covariance needs at least 2 rows, got {t}"
        )));
    }
    if panel.has_missing() {
        return Err(Error::Input("panel contains missing values".into()));
    }
    let k = panel.n_assets();
    let centered: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let col = panel.column(i);
            let mean = col.iter().sum::<f64>() / t as f64;
            col.into_iter().map(|v| v - mean).collect()
        })
        .collect();

    let mut cov = vec![vec![0.0; k]; k];
    for u in 0..k {
        for v in u..k {
            let mut acc = 0.0;
            for (a, b) in centered[u].iter().zip(&centered[v]) {
                acc += a * b;
            }
            let c = acc / t as f64;
            cov[u][v] = c;
            cov[v][u] = c;
        }
    }
    Ok(cov)
}

/// Symmetric Pearson correlation matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    assets: Vec<String>,
    rho: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    /// Wraps a precomputed matrix after checking symmetry, the unit diagonal
    /// and the `[-1, 1]` range.
    pub fn from_values(assets: Vec<String>, rho: Vec<Vec<f64>>) -> Result<Self> {
        let k = assets.len();
        if rho.len() != k {
            return Err(Error::Shape {
                expected: k,
                actual: rho.len(),
            });
        }
        for (i, row) in rho.iter().enumerate() {
            if row.len() != k {
                return Err(Error::Shape {
                    expected: k,
                    actual: row.len(),
                });
            }
            for (j, &r) in row.iter().enumerate() {
                if !r.is_finite() || !(-1.0..=1.0).contains(&r) {
                    return Err(Error::Input(format!("correlation ({i}, {j}) = {r}")));
                }
                if r != rho[j][i] {
                    return Err(Error::Input(format!(
                        "correlation ({i}, {j}) not symmetric"
                    )));
                }
            }
            if row[i] != 1.0 {
                return Err(Error::Input(format!("diagonal entry {i} is {}", row[i])));
            }
        }
        Ok(Self { assets, rho })
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rho[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rho
    }

    /// Strictly-upper-triangle entries in row-major order (`k(k-1)/2` values).
    pub fn upper_triangle(&self) -> Vec<f64> {
        let k = self.len();
        let mut out = Vec::with_capacity(k * k.saturating_sub(1) / 2);
        for i in 0..k {
            out.extend_from_slice(&self.rho[i][i + 1..]);
        }
        out
    }
}

/// Pearson correlations `cov(u, v) / (std(u) std(v))` from population moments.
pub fn correlation_matrix(panel: &ReturnsMatrix) -> Result<CorrelationMatrix> {
    let cov = covariance_matrix(panel)?;
    let k = cov.len();
    let mut std = Vec::with_capacity(k);
    for (i, row) in cov.iter().enumerate() {
        let var = row[i];
        if !(var > 0.0) || !var.is_finite() {
            return Err(Error::DegenerateAsset(panel.assets()[i].clone()));
        }
        std.push(var.sqrt());
    }

    let mut rho = vec![vec![0.0; k]; k];
    for u in 0..k {
        rho[u][u] = 1.0;
        for v in u + 1..k {
            let r = (cov[u][v] / (std[u] * std[v])).clamp(-1.0, 1.0);
            rho[u][v] = r;
            rho[v][u] = r;
        }
    }
    Ok(CorrelationMatrix {
        assets: panel.assets().to_vec(),
        rho,
    })
}

/// Nearest-rank percentile of the `M = k(k-1)/2` off-diagonal correlations.
///
/// Returns the ascending-sorted value at 1-based rank `ceil(p/100 * M)`.
pub fn percentile_threshold(corr: &CorrelationMatrix, percentile: f64) -> Result<f64> {
    if !(percentile > 0.0 && percentile < 100.0) {
        return Err(Error::Config(format!(
            "percentile must lie in (0, 100), got {percentile}"
        )));
    }
    if corr.len() < 2 {
        return Err(Error::InsufficientData(
            "percentile threshold needs at least 2 assets".into(),
        ));
    }
    let mut values = corr.upper_triangle();
    values.sort_by(f64::total_cmp);
    let m = values.len();
    let rank = ((percentile * m as f64) / 100.0).ceil() as usize;
    Ok(values[rank.clamp(1, m) - 1])
}

/// An undirected graph edge with `a < b` and its correlation weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Undirected, correlation-weighted graph over asset nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketGraph {
    assets: Vec<String>,
    edges: Vec<Edge>,
    threshold: f64,
}

impl MarketGraph {
    /// Builds a graph from arbitrary endpoint pairs.
    ///
    /// Endpoints are normalized to `a < b` and edges sorted. Self-loops,
    /// duplicates, out-of-range nodes and weights below `threshold` are
    /// rejected.
    pub fn new(assets: Vec<String>, edges: Vec<Edge>, threshold: f64) -> Result<Self> {
        let k = assets.len();
        let mut normalized = Vec::with_capacity(edges.len());
        for e in edges {
            if e.a == e.b {
                return Err(Error::Input(format!("self-loop on node {}", e.a)));
            }
            if e.a >= k || e.b >= k {
                return Err(Error::Input(format!(
                    "edge ({}, {}) out of range",
                    e.a, e.b
                )));
            }
            if e.weight < threshold || !e.weight.is_finite() {
                return Err(Error::Input(format!(
                    "edge ({}, {}) weight {} below threshold {threshold}",
                    e.a, e.b, e.weight
                )));
            }
            normalized.push(Edge {
                a: e.a.min(e.b),
                b: e.a.max(e.b),
                weight: e.weight,
            });
        }
        normalized.sort_by_key(|e| (e.a, e.b));
        if normalized
            .windows(2)
            .any(|w| (w[0].a, w[0].b) == (w[1].a, w[1].b))
        {
            return Err(Error::Input("duplicate edge".into()));
        }
        Ok(Self {
            assets,
            edges: normalized,
            threshold,
        })
    }

    /// Graph without edges.
    pub fn empty(assets: Vec<String>) -> Self {
        Self {
            assets,
            edges: Vec::new(),
            threshold: f64::NEG_INFINITY,
        }
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn n_nodes(&self) -> usize {
        self.assets.len()
    }

    /// Edges sorted by `(a, b)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Correlation cutoff the graph was built with.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let key = (u.min(v), u.max(v));
        self.edges
            .binary_search_by_key(&key, |e| (e.a, e.b))
            .is_ok()
    }

    /// Sorted neighbor lists, one per node.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for e in &self.edges {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Binary adjacency matrix, one row per node.
    pub fn adjacency_rows(&self) -> Vec<Vec<f64>> {
        let k = self.n_nodes();
        let mut rows = vec![vec![0.0; k]; k];
        for e in &self.edges {
            rows[e.a][e.b] = 1.0;
            rows[e.b][e.a] = 1.0;
        }
        rows
    }

    /// Graphviz export: undirected `graph`, nodes named by asset label,
    /// `weight` attribute holding the correlation to 6 decimals.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("graph market {\n");
        for a in &self.assets {
            let _ = writeln!(out, "  {};", dot_id(a));
        }
        for e in &self.edges {
            let _ = writeln!(
                out,
                "  {} -- {} [weight={:.6}];",
                dot_id(&self.assets[e.a]),
                dot_id(&self.assets[e.b]),
                e.weight
            );
        }
        out.push_str("}\n");
        out
    }
}

fn dot_id(label: &str) -> String {
    format!("\"{}\"", label.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Keeps every pair with `corr(u, v) >= threshold`, weighted by correlation.
pub fn build_thresholded_graph(corr: &CorrelationMatrix, threshold: f64) -> MarketGraph {
    let k = corr.len();
    let mut edges = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let weight = corr.get(a, b);
            if weight >= threshold {
                edges.push(Edge { a, b, weight });
            }
        }
    }
    MarketGraph {
        assets: corr.assets().to_vec(),
        edges,
        threshold,
    }
}

/// Metric distance `sqrt(2(1 - rho))`: 0 for perfect correlation, 2 for
/// perfect anti-correlation.
pub fn mantegna_distance(rho: f64) -> f64 {
    (2.0 * (1.0 - rho).max(0.0)).sqrt()
}

/// Minimum spanning forest under [`mantegna_distance`].
pub fn mst_reduce(graph: &MarketGraph) -> MarketGraph {
    spanning_forest(graph, mantegna_distance)
}

/// Kruskal's algorithm on every connected component, with edge cost
/// `distance(weight)`.
///
/// Equal costs are ordered by `(a, b)`, so the result is fully determined by
/// the rank order of the costs.
pub fn spanning_forest(graph: &MarketGraph, distance: impl Fn(f64) -> f64) -> MarketGraph {
    let mut order: Vec<(f64, &Edge)> = graph
        .edges
        .iter()
        .map(|e| (distance(e.weight), e))
        .collect();
    order.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then_with(|| (x.1.a, x.1.b).cmp(&(y.1.a, y.1.b)))
    });

    let mut sets = DisjointSets::new(graph.n_nodes());
    let mut kept: Vec<Edge> = order
        .into_iter()
        .filter(|(_, e)| sets.union(e.a, e.b))
        .map(|(_, e)| *e)
        .collect();
    kept.sort_by_key(|e| (e.a, e.b));

    MarketGraph {
        assets: graph.assets.clone(),
        edges: kept,
        threshold: graph.threshold,
    }
}

/// Union-find with path halving and union by size.
#[derive(Debug, Clone)]
pub struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn set_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r]
    }
}

/// Connected-component sizes, in order of each component's smallest node.
pub fn component_sizes(graph: &MarketGraph) -> Vec<usize> {
    let mut sets = DisjointSets::new(graph.n_nodes());
    for e in graph.edges() {
        sets.union(e.a, e.b);
    }
    let mut sizes = Vec::new();
    let mut seen = vec![false; graph.n_nodes()];
    for v in 0..graph.n_nodes() {
        let r = sets.find(v);
        if !seen[r] {
            seen[r] = true;
            sizes.push(sets.set_size(r));
        }
    }
    sizes
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn panel(columns: &[&[f64]]) -> ReturnsMatrix {
        let t = columns[0].len();
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let dates = (0..t as i64)
            .map(|i| start + chrono::Duration::days(i))
            .collect();
        let assets = (0..columns.len()).map(|i| format!("A{i}")).collect();
        let mut values = Vec::new();
        for r in 0..t {
            for c in columns {
                values.push(c[r]);
            }
        }
        ReturnsMatrix::new(dates, assets, values).unwrap()
    }

    fn labels(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("n{i}")).collect()
    }

    fn corr_from_upper(k: usize, upper: &[f64]) -> CorrelationMatrix {
        let mut rho = vec![vec![0.0; k]; k];
        let mut it = upper.iter();
        for i in 0..k {
            rho[i][i] = 1.0;
            for j in i + 1..k {
                let r = *it.next().unwrap();
                rho[i][j] = r;
                rho[j][i] = r;
            }
        }
        CorrelationMatrix::from_values(labels(k), rho).unwrap()
    }

    #[test]
    fn covariance_hand_values() {
        let cov = covariance_matrix(&panel(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]])).unwrap();
        assert!((cov[0][1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((cov[0][0] - 2.0 / 3.0).abs() < 1e-15);

        let cov = covariance_matrix(&panel(&[&[5.0, 5.0, 5.0], &[1.0, 2.0, 4.0]])).unwrap();
        assert_eq!(cov[0][0], 0.0);

        let cov = covariance_matrix(&panel(&[&[1.0, -1.0], &[-1.0, 1.0]])).unwrap();
        assert_eq!(cov[0][1], -1.0);
    }

    #[test]
    fn correlation_perfect_dependence() {
        let c = correlation_matrix(&panel(&[
            &[1.0, 2.0, 3.0],
            &[2.0, 4.0, 6.0],
            &[3.0, 2.0, 1.0],
        ]))
        .unwrap();
        assert!((c.get(0, 1) - 1.0).abs() < 1e-15);
        assert!((c.get(0, 2) + 1.0).abs() < 1e-15);
        assert_eq!(c.get(1, 1), 1.0);
    }

    #[test]
    fn correlation_matches_direct_formula() {
        let u = [1.0, 2.0, 3.0, 4.0];
        let v = [1.0, 2.0, 3.0, 100.0];
        // direct evaluation: means 2.5 and 26.5
        let du = [-1.5, -0.5, 0.5, 1.5];
        let dv = [-25.5, -24.5, -23.5, 73.5];
        let cov: f64 = du.iter().zip(&dv).map(|(a, b)| a * b).sum::<f64>() / 4.0;
        let su = (du.iter().map(|a| a * a).sum::<f64>() / 4.0).sqrt();
        let sv = (dv.iter().map(|a| a * a).sum::<f64>() / 4.0).sqrt();
        let expected = cov / (su * sv);
        let c = correlation_matrix(&panel(&[&u, &v])).unwrap();
        assert!((c.get(0, 1) - expected).abs() < 1e-12);
        assert!((expected - 0.78502642096301).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_names_asset() {
        let err = correlation_matrix(&panel(&[&[1.0, 2.0, 3.0], &[5.0, 5.0, 5.0]])).unwrap_err();
        match err {
            Error::DegenerateAsset(a) => assert_eq!(a, "A1"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn nearest_rank_percentile() {
        // k = 5 gives M = 10 upper-triangle values
        let upper: Vec<f64> = (1..=10).rev().map(|i| i as f64 / 10.0).collect();
        let c = corr_from_upper(5, &upper);
        assert_eq!(percentile_threshold(&c, 90.0).unwrap(), 0.9);
        assert_eq!(percentile_threshold(&c, 99.0).unwrap(), 1.0);
        assert_eq!(percentile_threshold(&c, 5.0).unwrap(), 0.1);

        let c = corr_from_upper(4, &[0.5; 6]);
        assert_eq!(percentile_threshold(&c, 37.0).unwrap(), 0.5);

        let c = corr_from_upper(2, &[-0.3]);
        assert_eq!(percentile_threshold(&c, 99.0).unwrap(), -0.3);
        assert_eq!(percentile_threshold(&c, 1.0).unwrap(), -0.3);

        assert!(matches!(
            percentile_threshold(&c, 100.0),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            percentile_threshold(&c, 0.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn thresholding() {
        let c = corr_from_upper(3, &[0.9, 0.5, 0.1]);
        let g = build_thresholded_graph(&c, 0.9);
        assert_eq!(g.edge_count(), 1);
        assert!(g.has_edge(1, 0));
        assert_eq!(build_thresholded_graph(&c, -1.0).edge_count(), 3);
        assert_eq!(build_thresholded_graph(&c, 1.0 + 1e-9).edge_count(), 0);
    }

    /// Builds a graph whose weights produce the requested Mantegna distances.
    fn graph_with_distances(k: usize, edges: &[(usize, usize, f64)]) -> MarketGraph {
        let edges = edges
            .iter()
            .map(|&(a, b, d)| Edge {
                a,
                b,
                weight: 1.0 - d * d / 2.0,
            })
            .collect();
        MarketGraph::new(labels(k), edges, f64::NEG_INFINITY).unwrap()
    }

    fn total_distance(g: &MarketGraph) -> f64 {
        g.edges().iter().map(|e| mantegna_distance(e.weight)).sum()
    }

    #[test]
    fn mst_triangle() {
        // distances {1, 2, 3}: the three spanning trees cost 3, 4 and 5
        let g = graph_with_distances(3, &[(0, 1, 1.0), (1, 2, 2.0), (0, 2, 3.0)]);
        let t = mst_reduce(&g);
        assert_eq!(t.edge_count(), 2);
        assert!((total_distance(&t) - 3.0).abs() < 1e-12);
        assert!(!t.has_edge(0, 2));
    }

    #[test]
    fn mst_of_tree_is_identity() {
        let g = graph_with_distances(4, &[(0, 1, 0.3), (1, 2, 1.2), (1, 3, 0.7)]);
        assert_eq!(mst_reduce(&g), g);
    }

    #[test]
    fn mst_two_triangles() {
        let g = graph_with_distances(
            6,
            &[
                (0, 1, 0.2),
                (1, 2, 0.4),
                (0, 2, 0.6),
                (3, 4, 0.3),
                (4, 5, 0.1),
                (3, 5, 0.5),
            ],
        );
        let t = mst_reduce(&g);
        assert_eq!(t.edge_count(), 4);
        assert_eq!(component_sizes(&t), vec![3, 3]);
        assert!((total_distance(&t) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mst_empty_graph() {
        let g = MarketGraph::empty(labels(3));
        assert_eq!(mst_reduce(&g).edge_count(), 0);
    }

    #[test]
    fn mst_ties_break_by_node_order() {
        let g = graph_with_distances(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]);
        let t = mst_reduce(&g);
        assert!(t.has_edge(0, 1) && t.has_edge(0, 2));
    }

    #[test]
    fn dot_export() {
        let c = corr_from_upper(3, &[0.9123456789, 0.5, 0.1]);
        let dot = build_thresholded_graph(&c, 0.5).to_dot();
        assert!(dot.starts_with("graph market {\n"));
        assert!(dot.contains("  \"n0\" -- \"n1\" [weight=0.912346];\n"));
        assert!(dot.contains("  \"n0\" -- \"n2\" [weight=0.500000];\n"));
        assert!(dot.contains("  \"n2\";\n"));
        assert!(dot.ends_with("}\n"));
    }

    #[test]
    fn graph_rejects_bad_edges() {
        let e = |a, b, weight| Edge { a, b, weight };
        assert!(MarketGraph::new(labels(2), vec![e(0, 0, 0.5)], 0.0).is_err());
        assert!(MarketGraph::new(labels(2), vec![e(0, 1, -0.5)], 0.0).is_err());
        assert!(MarketGraph::new(labels(2), vec![e(0, 1, 0.5), e(1, 0, 0.5)], 0.0).is_err());
        assert!(MarketGraph::new(labels(2), vec![e(0, 2, 0.5)], 0.0).is_err());
    }

    fn arb_panel() -> impl Strategy<Value = ReturnsMatrix> {
        (2usize..8, 3usize..30).prop_flat_map(|(k, t)| {
            proptest::collection::vec(-1.0f64..1.0, k * t).prop_map(move |v| {
                let cols: Vec<Vec<f64>> = (0..k)
                    .map(|c| (0..t).map(|r| v[r * k + c]).collect())
                    .collect();
                let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
                panel(&refs)
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn correlation_symmetric_unit_diagonal(p in arb_panel()) {
            let c = correlation_matrix(&p).unwrap();
            for i in 0..c.len() {
                prop_assert_eq!(c.get(i, i), 1.0);
                for j in 0..c.len() {
                    prop_assert_eq!(c.get(i, j), c.get(j, i));
                    prop_assert!(c.get(i, j).abs() <= 1.0);
                }
            }
        }

        #[test]
        fn correlation_affine_invariant(p in arb_panel(), scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
            let k = p.n_assets();
            let values: Vec<f64> = p.values().iter().enumerate()
                .map(|(i, v)| if i % k == 0 { scale * v + shift } else { *v })
                .collect();
            let q = ReturnsMatrix::new(p.dates().to_vec(), p.assets().to_vec(), values).unwrap();
            let (a, b) = (correlation_matrix(&p).unwrap(), correlation_matrix(&q).unwrap());
            for j in 1..k {
                prop_assert!((a.get(0, j) - b.get(0, j)).abs() < 1e-12);
            }
        }

        #[test]
        fn thresholded_edges_respect_cutoff(p in arb_panel(), pct in 1.0f64..99.0) {
            let c = correlation_matrix(&p).unwrap();
            let tau = percentile_threshold(&c, pct).unwrap();
            let g = build_thresholded_graph(&c, tau);
            prop_assert!(g.edge_count() >= 1);
            prop_assert!(g.edges().iter().all(|e| e.weight >= tau));
        }

        #[test]
        fn mst_invariant_under_monotone_cost(p in arb_panel()) {
            let c = correlation_matrix(&p).unwrap();
            let g = build_thresholded_graph(&c, -1.0);
            let by_d = mst_reduce(&g);
            let by_d2 = spanning_forest(&g, |r| mantegna_distance(r).powi(2));
            prop_assert_eq!(by_d.edges(), by_d2.edges());
            prop_assert_eq!(by_d.edge_count(), g.n_nodes() - 1);
        }
    }
}
