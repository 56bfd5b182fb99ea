//! Correlation matrix, percentile cutoff and the resulting market graph.
//!
//! cargo run --example correlation_network

use market_anomaly::corrnet::{build_thresholded_graph, correlation_matrix, percentile_threshold};
use market_anomaly::graphstats::summarize;
use market_anomaly::synthgen::{generate, RegimeSpec};

fn main() -> market_anomaly::Result<()> {
    let panel = generate(&[RegimeSpec::clean("calm", 250, 1.0, 0.4, 0.01)], 30, 42)?;
    let corr = correlation_matrix(&panel)?;

    for p in [99.0, 95.0, 90.0] {
        let tau = percentile_threshold(&corr, p)?;
        let graph = build_thresholded_graph(&corr, tau);
        let s = summarize(&graph);
        println!(
            "p{p:<4} tau = {tau:.4}  edges = {:>3}  isolated = {:.2}  clustering = {:.3}",
            s.edge_count, s.isolated_fraction, s.clustering_coeff
        );
    }

    let graph = build_thresholded_graph(&corr, percentile_threshold(&corr, 99.0)?);
    print!("{}", graph.to_dot());
    Ok(())
}
