//! Trains the dense autoencoder on graph adjacency rows, prints the loss
//! curve and round-trips the model through a checkpoint.
//!
//! cargo run --release --example autoencoder_training

use market_anomaly::autoencoder::{
    init_model, reconstruction_errors, train, AutoencoderModel, TrainConfig,
};
use market_anomaly::corrnet::{
    build_thresholded_graph, correlation_matrix, mst_reduce, percentile_threshold,
};
use market_anomaly::synthgen::{generate, RegimeSpec};

fn main() -> market_anomaly::Result<()> {
    let panel = generate(&[RegimeSpec::clean("calm", 500, 1.0, 0.3, 0.01)], 40, 3)?;
    let corr = correlation_matrix(&panel)?;
    let graph = mst_reduce(&build_thresholded_graph(
        &corr,
        percentile_threshold(&corr, 95.0)?,
    ));
    let rows = graph.adjacency_rows();

    let cfg = TrainConfig::for_nodes(graph.n_nodes(), 3);
    println!(
        "layers {:?}, lr {}, {} epochs",
        cfg.layer_dims(graph.n_nodes()),
        cfg.learning_rate,
        cfg.epochs
    );
    let (model, trace) = train(&init_model(graph.n_nodes(), &cfg)?, &rows, &cfg)?;
    for (epoch, loss) in trace.losses.iter().enumerate().step_by(50) {
        println!("epoch {:>3}  loss {loss:.6}", epoch + 1);
    }
    println!("final loss {:.6}", trace.last().unwrap());

    let mut buf = Vec::new();
    model.write_checkpoint(&mut buf)?;
    let restored = AutoencoderModel::read_checkpoint(buf.as_slice())?;
    println!(
        "checkpoint: {} bytes, {} parameters",
        buf.len(),
        restored.parameter_count()
    );

    let re = reconstruction_errors(&restored, &rows)?;
    let mut worst: Vec<(usize, f64)> = re.iter().copied().enumerate().collect();
    worst.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (i, e) in worst.iter().take(5) {
        println!("  {}  re = {e:.5}", graph.assets()[*i]);
    }
    Ok(())
}
