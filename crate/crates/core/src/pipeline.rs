//! End-to-end runs: panel -> graphs -> autoencoder -> q-sweep -> t-tests.
//!
//! A run is described by a TOML document:
//!
//! ```toml
//! input = "returns.csv"        # relative paths resolve against the config file
//! output_dir = "out"
//! percentile = 99.0            # winner-take-all cut, in (0, 100)
//! mst = true                   # reduce each graph to its spanning forest
//! q_grid = "-0.5:0.5:0.1"      # or an explicit list, e.g. [-0.5, 0.5]
//! detection_c = 2.0            # flag scores above mean + c * std
//!
//! [autoencoder]
//! epochs = 500
//! learning_rate = 1.0
//! seed = 0
//! # hidden_dim / bottleneck_dim default to the node-count rule
//!
//! [[periods]]
//! name = "before"
//! start = "2004-10-27"
//! end = "2007-06-27"
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize};

use crate::anomaly::{self, AnomalySet, ThresholdRule};
use crate::autoencoder::{self, TrainConfig, TrainTrace};
use crate::corrnet::{self, MarketGraph};
use crate::error::{Error, Result};
use crate::graphstats::{self, GraphSummary};
use crate::ingest::{self, PeriodSpec, ReturnsMatrix};
use crate::stats::{self, TTestResult};

pub const DEFAULT_PERCENTILE: f64 = 99.0;
pub const DEFAULT_DETECTION_C: f64 = 2.0;

/// Autoencoder settings; unset widths follow [`TrainConfig::for_nodes`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoencoderSettings {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bottleneck_dim: Option<usize>,
}

impl Default for AutoencoderSettings {
    fn default() -> Self {
        Self {
            epochs: default_epochs(),
            learning_rate: default_learning_rate(),
            seed: 0,
            hidden_dim: None,
            bottleneck_dim: None,
        }
    }
}

impl AutoencoderSettings {
    pub fn train_config(&self, k: usize) -> TrainConfig {
        let mut cfg = TrainConfig::for_nodes(k, self.seed);
        cfg.epochs = self.epochs;
        cfg.learning_rate = self.learning_rate;
        if let Some(h) = self.hidden_dim {
            cfg.hidden_dim = h;
        }
        if let Some(b) = self.bottleneck_dim {
            cfg.bottleneck_dim = b;
        }
        cfg
    }
}

fn default_epochs() -> usize {
    TrainConfig::DEFAULT_EPOCHS
}

fn default_learning_rate() -> f64 {
    TrainConfig::DEFAULT_LEARNING_RATE
}

fn default_percentile() -> f64 {
    DEFAULT_PERCENTILE
}

fn default_detection_c() -> f64 {
    DEFAULT_DETECTION_C
}

fn default_true() -> bool {
    true
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn deserialize_q_grid<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Grid {
        Range(String),
        List(Vec<f64>),
    }
    match Grid::deserialize(d)? {
        Grid::Range(s) => anomaly::parse_q_grid(&s).map_err(serde::de::Error::custom),
        Grid::List(v) => Ok(v),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: PathBuf,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub periods: Vec<PeriodSpec>,
    #[serde(default = "default_percentile")]
    pub percentile: f64,
    #[serde(default = "default_true")]
    pub mst: bool,
    #[serde(default)]
    pub autoencoder: AutoencoderSettings,
    #[serde(
        default = "anomaly::default_q_grid",
        deserialize_with = "deserialize_q_grid"
    )]
    pub q_grid: Vec<f64>,
    #[serde(default = "default_detection_c")]
    pub detection_c: f64,
}

impl PipelineConfig {
    /// Default settings for the given input and periods.
    pub fn new(input: impl Into<PathBuf>, periods: Vec<PeriodSpec>) -> Self {
        Self {
            input: input.into(),
            output_dir: default_output_dir(),
            periods,
            percentile: DEFAULT_PERCENTILE,
            mst: true,
            autoencoder: AutoencoderSettings::default(),
            q_grid: anomaly::default_q_grid(),
            detection_c: DEFAULT_DETECTION_C,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative `input`/`output_dir` resolve against
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.input.is_relative() {
            cfg.input = base.join(&cfg.input);
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.percentile > 0.0 && self.percentile < 100.0) {
            return Err(Error::Config(format!(
                "percentile must lie in (0, 100), got {}",
                self.percentile
            )));
        }
        if self.periods.is_empty() {
            return Err(Error::Config("at least one period is required".into()));
        }
        ingest::validate_periods(&self.periods)?;
        anomaly::validate_q_grid(&self.q_grid)?;
        if !self.detection_c.is_finite() {
            return Err(Error::Config("detection_c must be finite".into()));
        }
        let lr = self.autoencoder.learning_rate;
        if self.autoencoder.epochs == 0 || !(lr >= 0.0) || !lr.is_finite() {
            return Err(Error::Config(
                "autoencoder needs positive epochs and a non-negative learning rate".into(),
            ));
        }
        Ok(())
    }

    pub fn threshold_rule(&self) -> ThresholdRule {
        ThresholdRule {
            c: self.detection_c,
        }
    }
}

/// Anomaly count for one `q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub q: f64,
    pub threshold: f64,
    pub anomaly_count: usize,
    pub anomalies: Vec<String>,
}

/// Everything computed for one period.
#[derive(Debug, Clone, Serialize)]
pub struct PeriodReport {
    pub name: String,
    pub start: chrono::NaiveDate,
    pub end: chrono::NaiveDate,
    pub observations: usize,
    /// Correlation cutoff at the configured percentile.
    pub correlation_threshold: f64,
    /// Statistics of the thresholded graph before any spanning-forest step.
    pub thresholded: GraphSummary,
    /// Statistics of the analyzed graph (spanning forest when `mst` is on).
    pub summary: GraphSummary,
    pub train: TrainTrace,
    pub reconstruction_errors: Vec<f64>,
    pub sweep: Vec<SweepEntry>,
    #[serde(skip)]
    pub graph: MarketGraph,
    #[serde(skip)]
    pub anomaly_sets: Vec<AnomalySet>,
}

impl PeriodReport {
    /// Anomaly count per `q`, as t-test observations.
    pub fn counts(&self) -> Vec<f64> {
        self.sweep.iter().map(|s| s.anomaly_count as f64).collect()
    }

    pub fn mean_count(&self) -> f64 {
        let c = self.counts();
        c.iter().sum::<f64>() / c.len().max(1) as f64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnomalyReport {
    pub tool_version: String,
    /// The only non-deterministic field.
    pub generated_at: String,
    pub config: PipelineConfig,
    pub periods: Vec<PeriodReport>,
    pub ttests: Vec<TTestResult>,
}

impl AnomalyReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn period(&self, name: &str) -> Option<&PeriodReport> {
        self.periods.iter().find(|p| p.name == name)
    }
}

/// Runs every stage on one period's sub-panel.
pub fn analyze_period(
    spec: &PeriodSpec,
    panel: &ReturnsMatrix,
    config: &PipelineConfig,
) -> Result<PeriodReport> {
    let ctx = |module: &str| format!("{module} [{}]", spec.name);

    let corr = corrnet::correlation_matrix(panel).map_err(|e| e.context(ctx("corrnet")))?;
    let tau = corrnet::percentile_threshold(&corr, config.percentile)
        .map_err(|e| e.context(ctx("corrnet")))?;
    let thresholded = corrnet::build_thresholded_graph(&corr, tau);
    let graph = if config.mst {
        corrnet::mst_reduce(&thresholded)
    } else {
        thresholded.clone()
    };

    let k = graph.n_nodes();
    let rows = graph.adjacency_rows();
    let train_cfg = config.autoencoder.train_config(k);
    let (model, trace) = autoencoder::init_model(k, &train_cfg)
        .and_then(|m| autoencoder::train(&m, &rows, &train_cfg))
        .map_err(|e| e.context(ctx("autoencoder")))?;
    let re = autoencoder::reconstruction_errors(&model, &rows)
        .map_err(|e| e.context(ctx("autoencoder")))?;

    let anomaly_sets =
        anomaly::sweep_q(graph.assets(), &re, &config.q_grid, config.threshold_rule())
            .map_err(|e| e.context(ctx("anomaly")))?;
    let sweep = anomaly_sets
        .iter()
        .map(|s| SweepEntry {
            q: s.q,
            threshold: s.threshold,
            anomaly_count: s.count(),
            anomalies: s.anomalies.clone(),
        })
        .collect();

    Ok(PeriodReport {
        name: spec.name.clone(),
        start: spec.start,
        end: spec.end,
        observations: panel.n_rows(),
        correlation_threshold: tau,
        thresholded: graphstats::summarize(&thresholded),
        summary: graphstats::summarize(&graph),
        train: trace,
        reconstruction_errors: re,
        sweep,
        graph,
        anomaly_sets,
    })
}

/// Analyzes an already loaded panel. Performs no I/O.
pub fn analyze_panel(panel: &ReturnsMatrix, config: &PipelineConfig) -> Result<AnomalyReport> {
    config.validate()?;
    let panel = ingest::clean_panel(panel).map_err(|e| e.context("ingest"))?;
    let parts = ingest::split_periods(&panel, &config.periods).map_err(|e| e.context("ingest"))?;

    let periods = parts
        .iter()
        .map(|(spec, sub)| analyze_period(spec, sub, config))
        .collect::<Result<Vec<_>>>()?;

    let ttests = if periods.len() >= 2 {
        let counts: Vec<(String, Vec<f64>)> = periods
            .iter()
            .map(|p| (p.name.clone(), p.counts()))
            .collect();
        stats::compare_periods(&counts)?
    } else {
        Vec::new()
    };

    Ok(AnomalyReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        generated_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        config: config.clone(),
        periods,
        ttests,
    })
}

/// Loads the configured input, analyzes it and writes every artifact to
/// `config.output_dir`. Nothing is written when any stage fails.
pub fn run_pipeline(config: &PipelineConfig) -> Result<(AnomalyReport, Vec<PathBuf>)> {
    config.validate()?;
    let raw = ingest::load_returns_csv(&config.input).map_err(|e| e.context("ingest"))?;
    let report = analyze_panel(&raw, config)?;
    let written = export_outputs(&report, &config.output_dir)?;
    Ok((report, written))
}

fn file_stem(period: &str) -> String {
    period
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// `period,q,node_id,score,threshold,flagged`, one row per flagged node.
pub fn anomalies_csv(report: &AnomalyReport) -> String {
    let mut out = String::from("period,q,node_id,score,threshold,flagged\n");
    for p in &report.periods {
        for set in &p.anomaly_sets {
            for (&i, id) in set.indices.iter().zip(&set.anomalies) {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},true",
                    p.name, set.q, id, set.scores[i], set.threshold
                );
            }
        }
    }
    out
}

/// `period,q,anomaly_count`.
pub fn sweep_csv(report: &AnomalyReport) -> String {
    let mut out = String::from("period,q,anomaly_count\n");
    for p in &report.periods {
        for s in &p.sweep {
            let _ = writeln!(out, "{},{},{}", p.name, s.q, s.anomaly_count);
        }
    }
    out
}

/// Writes `report.json`, per-period `graph_<p>.dot`, `degrees_<p>.csv`,
/// `degree_dist_<p>.csv` and `trace_<p>.csv`, plus `anomalies.csv`,
/// `sweep.csv` and `ttests.csv`. Existing files are overwritten; if any write
/// fails, files written so far are removed.
pub fn export_outputs(report: &AnomalyReport, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<(PathBuf, String)> = vec![(dir.join("report.json"), report.to_json()?)];
    for p in &report.periods {
        let stem = file_stem(&p.name);
        files.push((dir.join(format!("graph_{stem}.dot")), p.graph.to_dot()));
        files.push((
            dir.join(format!("degrees_{stem}.csv")),
            graphstats::degree_rank_csv(&p.graph),
        ));
        files.push((
            dir.join(format!("degree_dist_{stem}.csv")),
            graphstats::degree_distribution_csv(&p.graph),
        ));
        files.push((dir.join(format!("trace_{stem}.csv")), p.train.to_csv()));
    }
    files.push((dir.join("anomalies.csv"), anomalies_csv(report)));
    files.push((dir.join("sweep.csv"), sweep_csv(report)));
    files.push((dir.join("ttests.csv"), stats::ttests_csv(&report.ttests)));

    let mut written = Vec::with_capacity(files.len());
    for (path, contents) in files {
        if let Err(e) = fs::write(&path, contents) {
            for w in &written {
                let _ = fs::remove_file(w);
            }
            return Err(Error::io(path, e));
        }
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults() {
        let cfg = PipelineConfig::from_toml(
            r#"
            input = "x.csv"
            [[periods]]
            name = "all"
            start = "2000-01-01"
            end = "2001-01-01"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.percentile, 99.0);
        assert!(cfg.mst);
        assert_eq!(cfg.q_grid, anomaly::default_q_grid());
        assert_eq!(cfg.detection_c, 2.0);
        assert_eq!(cfg.autoencoder.epochs, 500);
        assert_eq!(
            cfg.autoencoder.learning_rate,
            TrainConfig::DEFAULT_LEARNING_RATE
        );
        assert_eq!(cfg.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn config_q_grid_forms() {
        let base = "input = \"x.csv\"\n[[periods]]\nname = \"a\"\nstart = \"2000-01-01\"\nend = \"2000-02-01\"\n";
        let cfg = PipelineConfig::from_toml(&format!("q_grid = [0.25, 2.0]\n{base}")).unwrap();
        assert_eq!(cfg.q_grid, [0.25, 2.0]);
        let cfg =
            PipelineConfig::from_toml(&format!("q_grid = \"-0.5:0.5:0.05\"\n{base}")).unwrap();
        assert_eq!(cfg.q_grid.len(), 21);
        assert!(PipelineConfig::from_toml(&format!("q_grid = [0.5, 1.0]\n{base}")).is_err());
        assert!(PipelineConfig::from_toml(&format!("percentile = 100.0\n{base}")).is_err());
        assert!(PipelineConfig::from_toml(&format!("bogus = 1\n{base}")).is_err());
    }

    #[test]
    fn config_errors_map_to_exit_code_two() {
        let err = PipelineConfig::from_toml("input = 3").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn stems_are_filesystem_safe() {
        assert_eq!(file_stem("pre crisis/2007"), "pre_crisis_2007");
    }
}
