//! Tsallis entropy of a reconstruction-error distribution and the anomaly
//! count at each q.
//!
//! cargo run --example tsallis_sweep

use market_anomaly::anomaly::{
    parse_q_grid, score_distribution, shannon_entropy, shannon_entropy_nats, sweep_q,
    tsallis_entropy, ThresholdRule,
};
use market_anomaly::synthgen::asset_labels;

fn main() -> market_anomaly::Result<()> {
    // mostly ordinary nodes, two that reconstruct very badly, one very well
    let mut re = vec![
        0.02, 0.025, 0.03, 0.022, 0.027, 0.024, 0.021, 0.029, 0.026, 0.023,
    ];
    re.extend([0.3, 0.25, 0.001]);
    let ids = asset_labels(re.len());
    let p = score_distribution(&ids, &re)?;

    println!(
        "shannon: {:.4} bits, {:.4} nats",
        shannon_entropy(&p),
        shannon_entropy_nats(&p)
    );
    for q in [-0.5, 0.5, 2.0] {
        println!("S_{q} = {:.4}", tsallis_entropy(&p, q)?);
    }

    let grid = parse_q_grid("-0.5:0.5:0.1")?;
    for set in sweep_q(&ids, &re, &grid, ThresholdRule::default())? {
        println!(
            "q = {:>4}  threshold = {:>8.4}  flagged = {:?}",
            set.q, set.threshold, set.anomalies
        );
    }
    Ok(())
}
