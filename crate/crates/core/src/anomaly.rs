//! Entropy-based anomaly scoring.
//!
//! Reconstruction errors are normalized into a probability distribution over
//! nodes. Each node's score is its own term of the Tsallis entropy
//! `S_q = (1 - sum p_i^q) / (q - 1)`, i.e. `(p_i - p_i^q) / (q - 1)`, and a
//! node is flagged when its score exceeds `mean + c * std` of all scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this distance from `q = 1` the Shannon (natural-log) limit is used.
pub const Q_ONE_TOLERANCE: f64 = 1e-9;

const SUM_TOLERANCE: f64 = 1e-12;

/// Probability mass over graph nodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreDistribution {
    node_ids: Vec<String>,
    p: Vec<f64>,
}

impl ScoreDistribution {
    pub fn new(node_ids: Vec<String>, p: Vec<f64>) -> Result<Self> {
        if node_ids.len() != p.len() {
            return Err(Error::Shape {
                expected: node_ids.len(),
                actual: p.len(),
            });
        }
        if p.is_empty() {
            return Err(Error::Distribution("empty distribution".into()));
        }
        if let Some(bad) = p.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Distribution(format!("invalid probability {bad}")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::Distribution(format!("probabilities sum to {total}")));
        }
        Ok(Self { node_ids, p })
    }

    /// Distribution over unnamed nodes `0..n`.
    pub fn from_probabilities(p: Vec<f64>) -> Result<Self> {
        let ids = (0..p.len()).map(|i| i.to_string()).collect();
        Self::new(ids, p)
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    fn has_zero(&self) -> bool {
        self.p.contains(&0.0)
    }
}

/// Shannon entropy in bits.
pub fn shannon_entropy(p: &ScoreDistribution) -> f64 {
    p.p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.log2())
        .sum()
}

/// Shannon entropy in nats, the `q -> 1` limit of Tsallis entropy.
pub fn shannon_entropy_nats(p: &ScoreDistribution) -> f64 {
    p.p.iter().filter(|&&v| v > 0.0).map(|&v| -v * v.ln()).sum()
}

fn check_q(p: &ScoreDistribution, q: f64) -> Result<()> {
    if !q.is_finite() {
        return Err(Error::Domain(format!("q must be finite, got {q}")));
    }
    if q <= 0.0 && p.has_zero() {
        return Err(Error::Domain(format!(
            "q = {q} is undefined for zero-probability states"
        )));
    }
    Ok(())
}

fn near_one(q: f64) -> bool {
    (q - 1.0).abs() <= Q_ONE_TOLERANCE
}

/// Tsallis entropy `(1 - sum p_i^q) / (q - 1)`; natural-log Shannon entropy
/// when `q` is within [`Q_ONE_TOLERANCE`] of 1.
pub fn tsallis_entropy(p: &ScoreDistribution, q: f64) -> Result<f64> {
    check_q(p, q)?;
    if near_one(q) {
        return Ok(shannon_entropy_nats(p));
    }
    let power_sum: f64 = p.p.iter().filter(|&&v| v > 0.0).map(|&v| v.powf(q)).sum();
    Ok((1.0 - power_sum) / (q - 1.0))
}

/// Normalizes reconstruction errors into `p_i = re_i / sum re`.
pub fn score_distribution(node_ids: &[String], re: &[f64]) -> Result<ScoreDistribution> {
    if let Some(bad) = re.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::Input(format!("invalid reconstruction error {bad}")));
    }
    let total: f64 = re.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateScores);
    }
    ScoreDistribution::new(node_ids.to_vec(), re.iter().map(|v| v / total).collect())
}

/// Per-node Tsallis terms `(p_i - p_i^q) / (q - 1)`; `-p_i ln p_i` near
/// `q = 1`. They sum to [`tsallis_entropy`].
pub fn node_scores(p: &ScoreDistribution, q: f64) -> Result<Vec<f64>> {
    check_q(p, q)?;
    if near_one(q) {
        return Ok(p
            .p
            .iter()
            .map(|&v| if v > 0.0 { -v * v.ln() } else { 0.0 })
            .collect());
    }
    Ok(p.p
        .iter()
        .map(|&v| {
            if v > 0.0 {
                (v - v.powf(q)) / (q - 1.0)
            } else {
                0.0
            }
        })
        .collect())
}

/// Flags scores strictly above `mean + c * std` (population std).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRule {
    pub c: f64,
}

impl Default for ThresholdRule {
    fn default() -> Self {
        Self { c: 2.0 }
    }
}

impl ThresholdRule {
    pub fn threshold(&self, scores: &[f64]) -> f64 {
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
        mean + self.c * var.sqrt()
    }
}

/// Flagged nodes for one value of `q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnomalySet {
    pub q: f64,
    pub threshold: f64,
    /// Flagged node labels, highest score first.
    pub anomalies: Vec<String>,
    /// Node positions of `anomalies`, same order.
    pub indices: Vec<usize>,
    /// Score of every node, in node order.
    pub scores: Vec<f64>,
}

impl AnomalySet {
    pub fn count(&self) -> usize {
        self.anomalies.len()
    }
}

/// Applies `rule` to `scores`; ties in score keep node order.
pub fn detect(
    node_ids: &[String],
    scores: Vec<f64>,
    q: f64,
    rule: ThresholdRule,
) -> Result<AnomalySet> {
    if node_ids.len() != scores.len() {
        return Err(Error::Shape {
            expected: node_ids.len(),
            actual: scores.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::Input("no scores to threshold".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Input("non-finite anomaly score".into()));
    }
    let threshold = rule.threshold(&scores);
    let mut indices: Vec<usize> = (0..scores.len())
        .filter(|&i| scores[i] > threshold)
        .collect();
    indices.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    Ok(AnomalySet {
        q,
        threshold,
        anomalies: indices.iter().map(|&i| node_ids[i].clone()).collect(),
        indices,
        scores,
    })
}

/// Runs detection for every `q` over one shared distribution.
///
/// Non-positive `q` values are skipped with a warning when some node has a
/// zero reconstruction error.
pub fn sweep_q(
    node_ids: &[String],
    re: &[f64],
    q_grid: &[f64],
    rule: ThresholdRule,
) -> Result<Vec<AnomalySet>> {
    let dist = score_distribution(node_ids, re)?;
    let mut out = Vec::with_capacity(q_grid.len());
    for &q in q_grid {
        if q <= 0.0 && dist.has_zero() {
            log::warn!("skipping q = {q}: some nodes have zero reconstruction error");
            continue;
        }
        let scores = node_scores(&dist, q)?;
        out.push(detect(node_ids, scores, q, rule)?);
    }
    Ok(out)
}

/// Evenly spaced `q` values from `start` to `end` inclusive.
///
/// Values are rounded to 12 decimals so that `-0.5:0.5:0.1` yields the exact
/// decimals `-0.5, -0.4, ..., 0.5`.
pub fn q_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && end.is_finite() && step.is_finite()) || step <= 0.0 || end < start {
        return Err(Error::Config(format!(
            "invalid q grid {start}:{end}:{step}"
        )));
    }
    let n = ((end - start) / step + 1e-9).floor() as usize + 1;
    let grid: Vec<f64> = (0..n)
        .map(|i| {
            let v = ((start + i as f64 * step) * 1e12).round() / 1e12;
            if v == 0.0 {
                0.0
            } else {
                v
            }
        })
        .collect();
    validate_q_grid(&grid)?;
    Ok(grid)
}

/// Parses `a:b:step`.
pub fn parse_q_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').map(str::trim).collect();
    let [a, b, step] = parts.as_slice() else {
        return Err(Error::Config(format!(
            "q grid must look like a:b:step, got {spec:?}"
        )));
    };
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::Config(format!("bad number {s:?} in q grid {spec:?}")))
    };
    q_grid(num(a)?, num(b)?, num(step)?)
}

/// `-0.5, -0.4, ..., 0.5`.
pub fn default_q_grid() -> Vec<f64> {
    q_grid(-0.5, 0.5, 0.1).expect("default grid is valid")
}

/// Rejects empty grids, non-finite values and `q = 1`.
pub fn validate_q_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("empty q grid".into()));
    }
    for &q in grid {
        if !q.is_finite() {
            return Err(Error::Config(format!("non-finite q {q}")));
        }
        if near_one(q) {
            return Err(Error::Config("q grid must not contain 1".into()));
        }
    }
    Ok(())
}
