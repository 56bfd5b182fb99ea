use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use market_anomaly::anomaly::parse_q_grid;
use market_anomaly::ingest::write_returns_csv;
use market_anomaly::pipeline::{run_pipeline, PipelineConfig};
use market_anomaly::synthgen::Scenario;
use market_anomaly::{Error, Result};

#[derive(Parser)]
#[command(
    version,
    about = "Correlation-graph anomaly detection with Tsallis entropy scoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline from a TOML config.
    ///
    /// Defaults when the config omits them: percentile 99, spanning-forest
    /// reduction on, q grid -0.5:0.5:0.1, detection c = 2, 500 epochs at
    /// learning rate 1.0, seed 0, output directory `out`.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Autoencoder seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Correlation percentile in (0, 100).
        #[arg(long)]
        percentile: Option<f64>,
        /// Analyze the thresholded graph without spanning-forest reduction.
        #[arg(long)]
        no_mst: bool,
        /// q grid as start:end:step.
        #[arg(long, allow_hyphen_values = true)]
        q_grid: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic return panel from a TOML scenario.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            percentile,
            no_mst,
            q_grid,
            out,
        } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.autoencoder.seed = seed;
            }
            if let Some(p) = percentile {
                cfg.percentile = p;
            }
            if no_mst {
                cfg.mst = false;
            }
            if let Some(grid) = q_grid {
                cfg.q_grid = parse_q_grid(&grid)?;
            }
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let (report, written) = run_pipeline(&cfg)?;
            for p in &report.periods {
                log::info!(
                    "{}: {} edges, mean anomaly count {:.2}",
                    p.name,
                    p.summary.edge_count,
                    p.mean_count()
                );
            }
            for t in &report.ttests {
                println!(
                    "{}: t = {:.4}, p = {:.3e}",
                    t.label(),
                    t.t_statistic,
                    t.p_value
                );
            }
            println!(
                "wrote {} files to {}",
                written.len(),
                cfg.output_dir.display()
            );
            Ok(())
        }
        Command::Synth { spec, out } => {
            let text = std::fs::read_to_string(&spec).map_err(|e| Error::Io {
                path: spec.clone(),
                source: e,
            })?;
            let scenario = Scenario::from_toml(&text)?;
            let panel = scenario.generate()?;
            let file = File::create(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            write_returns_csv(&panel, file)?;
            // period blocks ready to paste into a run config
            for p in scenario.periods() {
                println!(
                    "[[periods]]\nname = \"{}\"\nstart = \"{}\"\nend = \"{}\"\n",
                    p.name, p.start, p.end
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
