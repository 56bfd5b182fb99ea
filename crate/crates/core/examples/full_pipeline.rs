//! Runs the whole analysis on the bundled crisis scenario over ten seeds and
//! prints per-period graph statistics, anomaly counts and t-tests.
//!
//! cargo run --release --example full_pipeline

use market_anomaly::anomaly::parse_q_grid;
use market_anomaly::pipeline::{analyze_panel, PipelineConfig};
use market_anomaly::synthgen::Scenario;

fn main() -> market_anomaly::Result<()> {
    let base = Scenario::from_toml(include_str!("configs/crisis.toml"))?;
    for seed in 0..10 {
        let scenario = Scenario {
            seed,
            ..base.clone()
        };
        let mut config = PipelineConfig::new("-", scenario.periods());
        config.percentile = 75.0;
        config.q_grid = parse_q_grid("-0.5:0.5:0.1")?;
        config.autoencoder.seed = seed;
        let report = analyze_panel(&scenario.generate()?, &config)?;

        println!("seed {seed}");
        for p in &report.periods {
            println!(
                "  {:<7} edges {:>3} -> {:>3}  clustering {:.3} -> {:.3}  counts {:?}  mean {:.2}",
                p.name,
                p.thresholded.edge_count,
                p.summary.edge_count,
                p.thresholded.clustering_coeff,
                p.summary.clustering_coeff,
                p.counts(),
                p.mean_count()
            );
        }
        for t in &report.ttests {
            println!(
                "  {:<18} t = {:>7.3}  p = {:.3}",
                t.label(),
                t.t_statistic,
                t.p_value
            );
        }
    }
    Ok(())
}
