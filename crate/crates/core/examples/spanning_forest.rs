//! Reducing a thresholded graph to its minimum spanning forest under the
//! distance `sqrt(2 (1 - rho))`.
//!
//! cargo run --example spanning_forest

use market_anomaly::corrnet::{
    build_thresholded_graph, component_sizes, correlation_matrix, mantegna_distance, mst_reduce,
    percentile_threshold,
};
use market_anomaly::graphstats::summarize;
use market_anomaly::synthgen::{generate, RegimeSpec};

fn main() -> market_anomaly::Result<()> {
    let panel = generate(&[RegimeSpec::clean("calm", 500, 1.0, 0.3, 0.01)], 40, 7)?;
    let corr = correlation_matrix(&panel)?;
    let graph = build_thresholded_graph(&corr, percentile_threshold(&corr, 90.0)?);
    let forest = mst_reduce(&graph);

    for (label, g) in [("thresholded", &graph), ("forest", &forest)] {
        let s = summarize(g);
        println!(
            "{label:<12} edges = {:>3}  components = {:>2}  clustering = {:.3}",
            s.edge_count,
            component_sizes(g).len(),
            s.clustering_coeff
        );
    }

    let total: f64 = forest
        .edges()
        .iter()
        .map(|e| mantegna_distance(e.weight))
        .sum();
    println!("forest length = {total:.4}");
    for e in forest.edges().iter().take(5) {
        println!(
            "  {} - {}  rho = {:.3}  d = {:.3}",
            forest.assets()[e.a],
            forest.assets()[e.b],
            e.weight,
            mantegna_distance(e.weight)
        );
    }
    Ok(())
}
