//! Synthetic multi-regime return panels with known anomalous nodes.
//!
//! Each regime follows a one-factor Gaussian model
//! `r[t][i] = beta_i * f_t + eps[t][i]`, with `f_t ~ N(0, FACTOR_VOL^2)` and
//! `eps ~ N(0, idiosyncratic_vol^2)`. Loadings are drawn uniformly from
//! `mean ± spread` per regime; the loadings of anomalous nodes are scaled by
//! `1 - anomaly_decorrelation`, which detaches them from the common factor.

use chrono::{Datelike, Duration, NaiveDate, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{PeriodSpec, ReturnsMatrix};

/// Volatility of the common factor.
pub const FACTOR_VOL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSpec {
    pub name: String,
    pub days: usize,
    pub factor_loading_mean: f64,
    pub factor_loading_spread: f64,
    pub idiosyncratic_vol: f64,
    #[serde(default)]
    pub anomalous_nodes: Vec<usize>,
    #[serde(default)]
    pub anomaly_decorrelation: f64,
}

impl RegimeSpec {
    /// Regime without injected anomalies.
    pub fn clean(
        name: impl Into<String>,
        days: usize,
        loading_mean: f64,
        loading_spread: f64,
        idio_vol: f64,
    ) -> Self {
        Self {
            name: name.into(),
            days,
            factor_loading_mean: loading_mean,
            factor_loading_spread: loading_spread,
            idiosyncratic_vol: idio_vol,
            anomalous_nodes: Vec::new(),
            anomaly_decorrelation: 0.0,
        }
    }

    pub fn with_anomalies(mut self, nodes: Vec<usize>, decorrelation: f64) -> Self {
        self.anomalous_nodes = nodes;
        self.anomaly_decorrelation = decorrelation;
        self
    }

    fn validate(&self, k: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("regime {:?}: {msg}", self.name)));
        if self.days < 2 {
            return bad(format!("days must be at least 2, got {}", self.days));
        }
        if !(self.idiosyncratic_vol > 0.0) || !self.idiosyncratic_vol.is_finite() {
            return bad(format!(
                "idiosyncratic_vol must be positive, got {}",
                self.idiosyncratic_vol
            ));
        }
        if !self.factor_loading_mean.is_finite()
            || !(self.factor_loading_spread >= 0.0)
            || !self.factor_loading_spread.is_finite()
        {
            return bad("loading mean must be finite and spread non-negative".into());
        }
        if !(0.0..=1.0).contains(&self.anomaly_decorrelation) {
            return bad(format!(
                "anomaly_decorrelation must lie in [0, 1], got {}",
                self.anomaly_decorrelation
            ));
        }
        if let Some(n) = self.anomalous_nodes.iter().find(|&&n| n >= k) {
            return bad(format!("anomalous node {n} out of range for k = {k}"));
        }
        Ok(())
    }
}

/// A complete generator input, as read by `synth --spec`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub k: usize,
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start: NaiveDate,
    pub regimes: Vec<RegimeSpec>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("synthetic scenario: {e}")))
    }

    pub fn generate(&self) -> Result<ReturnsMatrix> {
        generate_from(&self.regimes, self.k, self.seed, self.start)
    }

    /// Date window of every regime in the generated panel.
    pub fn periods(&self) -> Vec<PeriodSpec> {
        regime_periods(&self.regimes, self.start)
    }
}

/// 2004-10-27, a Wednesday.
pub fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2004, 10, 27).unwrap()
}

/// Asset labels `S000, S001, ...`.
pub fn asset_labels(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("S{i:03}")).collect()
}

fn weekdays_from(start: NaiveDate) -> impl Iterator<Item = NaiveDate> {
    let mut day = start;
    std::iter::from_fn(move || {
        while matches!(day.weekday(), Weekday::Sat | Weekday::Sun) {
            day += Duration::days(1);
        }
        let out = day;
        day += Duration::days(1);
        Some(out)
    })
}

/// Generates the concatenated panel starting at [`default_start`].
pub fn generate(specs: &[RegimeSpec], k: usize, seed: u64) -> Result<ReturnsMatrix> {
    generate_from(specs, k, seed, default_start())
}

/// Generates the concatenated panel with consecutive weekday dates from
/// `start`.
pub fn generate_from(
    specs: &[RegimeSpec],
    k: usize,
    seed: u64,
    start: NaiveDate,
) -> Result<ReturnsMatrix> {
    if k < 4 {
        return Err(Error::Config(format!("need at least 4 assets, got {k}")));
    }
    if specs.is_empty() {
        return Err(Error::Config("no regimes".into()));
    }
    for s in specs {
        s.validate(k)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let total_days: usize = specs.iter().map(|s| s.days).sum();
    let mut values = Vec::with_capacity(total_days * k);

    for spec in specs {
        let mut loadings: Vec<f64> = (0..k)
            .map(|_| {
                spec.factor_loading_mean + spec.factor_loading_spread * rng.random_range(-1.0..=1.0)
            })
            .collect();
        for &n in &spec.anomalous_nodes {
            loadings[n] *= 1.0 - spec.anomaly_decorrelation;
        }
        for _ in 0..spec.days {
            let factor = FACTOR_VOL * unit.sample(&mut rng);
            for beta in &loadings {
                values.push(beta * factor + spec.idiosyncratic_vol * unit.sample(&mut rng));
            }
        }
    }

    let dates = weekdays_from(start).take(total_days).collect();
    ReturnsMatrix::new(dates, asset_labels(k), values)
}

/// Inclusive date range of each regime, matching [`generate_from`]'s dates.
pub fn regime_periods(specs: &[RegimeSpec], start: NaiveDate) -> Vec<PeriodSpec> {
    let dates: Vec<NaiveDate> = weekdays_from(start)
        .take(specs.iter().map(|s| s.days).sum())
        .collect();
    let mut offset = 0;
    specs
        .iter()
        .map(|s| {
            let p = PeriodSpec::new(s.name.clone(), dates[offset], dates[offset + s.days - 1]);
            offset += s.days;
            p
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrnet::correlation_matrix;
    use crate::ingest::{read_returns_csv, write_returns_csv};

    fn regime(days: usize) -> RegimeSpec {
        RegimeSpec::clean("r", days, 1.0, 0.3, 0.01)
    }

    #[test]
    fn deterministic_per_seed() {
        let specs = [regime(50)];
        assert_eq!(
            generate(&specs, 8, 3).unwrap(),
            generate(&specs, 8, 3).unwrap()
        );
        assert_ne!(
            generate(&specs, 8, 3).unwrap(),
            generate(&specs, 8, 4).unwrap()
        );
    }

    #[test]
    fn weekday_dates() {
        let p = generate(&[regime(12)], 4, 0).unwrap();
        assert_eq!(p.dates()[0], default_start());
        assert!(p
            .dates()
            .iter()
            .all(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)));
        // Wed 27 Oct + 12 weekdays ends on Thu 11 Nov
        assert_eq!(
            *p.dates().last().unwrap(),
            NaiveDate::from_ymd_opt(2004, 11, 11).unwrap()
        );
    }

    #[test]
    fn invalid_specs() {
        assert!(generate(&[regime(50)], 3, 0).is_err());
        assert!(generate(&[regime(1)], 8, 0).is_err());
        assert!(generate(&[regime(50).with_anomalies(vec![8], 0.5)], 8, 0).is_err());
        assert!(generate(&[regime(50).with_anomalies(vec![1], 1.5)], 8, 0).is_err());
        let mut r = regime(50);
        r.idiosyncratic_vol = 0.0;
        assert!(generate(&[r], 8, 0).is_err());
    }

    #[test]
    fn zero_decorrelation_is_a_no_op() {
        let plain = generate(&[regime(30)], 6, 9).unwrap();
        let injected = generate(&[regime(30).with_anomalies(vec![0, 2], 0.0)], 6, 9).unwrap();
        assert_eq!(plain, injected);
    }

    #[test]
    fn vanishing_noise_gives_unit_correlation() {
        let r = RegimeSpec::clean("r", 200, 1.0, 0.0, 1e-12);
        let c = correlation_matrix(&generate(&[r], 5, 1).unwrap()).unwrap();
        assert!(c.upper_triangle().iter().all(|&v| v > 1.0 - 1e-9));
    }

    #[test]
    fn injected_nodes_have_lowest_mean_correlation() {
        let r = RegimeSpec::clean("r", 2000, 1.0, 0.2, 0.01)
            .with_anomalies(vec![3, 11, 17, 25, 38], 0.9);
        let c = correlation_matrix(&generate(&[r], 40, 21).unwrap()).unwrap();
        let mean_abs: Vec<f64> = (0..40)
            .map(|i| {
                (0..40)
                    .filter(|&j| j != i)
                    .map(|j| c.get(i, j).abs())
                    .sum::<f64>()
                    / 39.0
            })
            .collect();
        let mut order: Vec<usize> = (0..40).collect();
        order.sort_by(|&a, &b| mean_abs[a].total_cmp(&mean_abs[b]));
        let mut lowest = order[..5].to_vec();
        lowest.sort_unstable();
        assert_eq!(lowest, [3, 11, 17, 25, 38]);
    }

    #[test]
    fn regime_periods_tile_the_panel() {
        let specs = [regime(7), regime(9)];
        let panel = generate(&specs, 4, 0).unwrap();
        let periods = regime_periods(&specs, default_start());
        assert_eq!(periods[0].start, panel.dates()[0]);
        assert_eq!(periods[0].end, panel.dates()[6]);
        assert_eq!(periods[1].start, panel.dates()[7]);
        assert_eq!(periods[1].end, *panel.dates().last().unwrap());
    }

    #[test]
    fn csv_round_trip() {
        let panel = generate(&[regime(20)], 5, 2).unwrap();
        let mut buf = Vec::new();
        write_returns_csv(&panel, &mut buf).unwrap();
        assert_eq!(read_returns_csv(buf.as_slice()).unwrap(), panel);
    }

    #[test]
    fn scenario_from_toml() {
        let s = Scenario::from_toml(
            r#"
            k = 6
            seed = 4
            start = "2010-01-04"

            [[regimes]]
            name = "calm"
            days = 30
            factor_loading_mean = 1.0
            factor_loading_spread = 0.2
            idiosyncratic_vol = 0.01

            [[regimes]]
            name = "stress"
            days = 30
            factor_loading_mean = 1.5
            factor_loading_spread = 0.2
            idiosyncratic_vol = 0.01
            anomalous_nodes = [1, 2]
            anomaly_decorrelation = 0.8
            "#,
        )
        .unwrap();
        assert_eq!(s.regimes[1].anomalous_nodes, [1, 2]);
        let panel = s.generate().unwrap();
        assert_eq!(panel.n_rows(), 60);
        assert_eq!(s.periods()[1].name, "stress");
    }
}
