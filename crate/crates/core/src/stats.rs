//! Welch two-sample t-tests on per-`q` anomaly counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const CF_TOLERANCE: f64 = 1e-12;
const CF_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub pair: (String, String),
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    /// Two-sided tail probability at `|t|`.
    pub p_value: f64,
}

impl TTestResult {
    pub fn label(&self) -> String {
        format!("{} vs {}", self.pair.0, self.pair.1)
    }
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Test(format!(
            "each sample needs at least 2 observations, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Test("non-finite observation".into()));
    }
    Ok(())
}

/// Unequal-variance t-test with Welch–Satterthwaite degrees of freedom.
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    check_samples(a, b)?;
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (sa, sb) = (va / na, vb / nb);
    if sa + sb <= 0.0 {
        return Err(Error::Test("both samples have zero variance".into()));
    }
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TTestResult {
        pair: (String::new(), String::new()),
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: student_t_two_sided(t, df)?,
    })
}

/// Classic pooled-variance Student t-test (`df = n_a + n_b - 2`).
pub fn pooled_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    check_samples(a, b)?;
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
    if pooled <= 0.0 {
        return Err(Error::Test("both samples have zero variance".into()));
    }
    let t = (ma - mb) / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    Ok(TTestResult {
        pair: (String::new(), String::new()),
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: student_t_two_sided(t, df)?,
    })
}

/// Welch tests for every pair of periods, `(0,1), (0,2), .., (1,2), ..` in
/// declaration order.
pub fn compare_periods(counts: &[(String, Vec<f64>)]) -> Result<Vec<TTestResult>> {
    if counts.len() < 2 {
        return Err(Error::Test(format!(
            "need at least 2 periods, got {}",
            counts.len()
        )));
    }
    let mut out = Vec::new();
    for (i, (name_a, a)) in counts.iter().enumerate() {
        for (name_b, b) in &counts[i + 1..] {
            let mut r =
                welch_ttest(a, b).map_err(|e| e.context(format!("stats: {name_a} vs {name_b}")))?;
            r.pair = (name_a.clone(), name_b.clone());
            out.push(r);
        }
    }
    Ok(out)
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom:
/// `I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn student_t_two_sided(t: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) || !df.is_finite() || t.is_nan() {
        return Err(Error::Test(format!("invalid t = {t} or df = {df}")));
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    let x = df / (df + t * t);
    Ok(regularized_incomplete_beta(x, df / 2.0, 0.5)?.clamp(0.0, 1.0))
}

/// Regularized incomplete beta `I_x(a, b)` via Lentz's continued fraction.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || !(a > 0.0) || !(b > 0.0) {
        return Err(Error::Test(format!(
            "I_x(a, b) undefined for x={x}, a={a}, b={b}"
        )));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The fraction converges fastest for x below the mean a / (a + b).
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_continued_fraction(x, a, b)? / a)
    } else {
        Ok(1.0 - front * beta_continued_fraction(1.0 - x, b, a)? / b)
    }
}

fn beta_continued_fraction(x: f64, a: f64, b: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < CF_TOLERANCE {
            return Ok(h);
        }
    }
    Err(Error::Test(format!(
        "incomplete beta did not converge for x={x}, a={a}, b={b}"
    )))
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `pair,t_statistic,df,p_value` CSV.
pub fn ttests_csv(results: &[TTestResult]) -> String {
    let mut out = String::from("pair,t_statistic,df,p_value\n");
    for r in results {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.label(),
            r.t_statistic,
            r.degrees_of_freedom,
            r.p_value
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(100.5) - statrs::function::gamma::ln_gamma(100.5)).abs() < 1e-10);
    }

    #[test]
    fn incomplete_beta_closed_forms() {
        // I_x(1, 1) = x and I_x(a, 1) = x^a
        for x in [0.1, 0.5, 0.9] {
            assert!((regularized_incomplete_beta(x, 1.0, 1.0).unwrap() - x).abs() < 1e-13);
            assert!((regularized_incomplete_beta(x, 3.0, 1.0).unwrap() - x.powi(3)).abs() < 1e-13);
        }
        assert_eq!(regularized_incomplete_beta(0.0, 2.0, 3.0).unwrap(), 0.0);
        assert_eq!(regularized_incomplete_beta(1.0, 2.0, 3.0).unwrap(), 1.0);
        assert!(regularized_incomplete_beta(1.5, 2.0, 3.0).is_err());
    }

    #[test]
    fn cauchy_tail() {
        // df = 1 is Cauchy: P(|T| >= t) = 1 - 2 atan(t) / pi
        for t in [0.5, 1.0, 3.0, 40.0] {
            let expected = 1.0 - 2.0 * f64::atan(t) / std::f64::consts::PI;
            assert!((student_t_two_sided(t, 1.0).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_samples() {
        let a = [1.0, 4.0, 2.0, 8.0];
        let r = welch_ttest(&a, &a).unwrap();
        assert_eq!(r.t_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn shifted_samples() {
        let r = welch_ttest(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert!((r.t_statistic + 1.0).abs() < 1e-15);
        assert!((r.degrees_of_freedom - 8.0).abs() < 1e-12);
        // two-sided tail of t(8) at 1.0, from an independent t CDF
        let cdf = <statrs::distribution::StudentsT as statrs::distribution::ContinuousCDF<
            f64,
            f64,
        >>::cdf(
            &statrs::distribution::StudentsT::new(0.0, 1.0, 8.0).unwrap(),
            -1.0,
        );
        assert!((r.p_value - 2.0 * cdf).abs() < 1e-10);
    }

    #[test]
    fn antisymmetry() {
        let a = [3.0, 1.0, 4.0, 1.0, 5.0];
        let b = [9.0, 2.0, 6.0, 5.0, 3.0, 5.0];
        let (x, y) = (welch_ttest(&a, &b).unwrap(), welch_ttest(&b, &a).unwrap());
        assert_eq!(x.t_statistic, -y.t_statistic);
        assert_eq!(x.p_value, y.p_value);
        assert_eq!(x.degrees_of_freedom, y.degrees_of_freedom);
    }

    #[test]
    fn degenerate_samples() {
        assert!(matches!(
            welch_ttest(&[1.0, 1.0], &[2.0, 2.0]),
            Err(Error::Test(_))
        ));
        assert!(matches!(
            welch_ttest(&[1.0], &[2.0, 3.0]),
            Err(Error::Test(_))
        ));
        // one constant sample is fine
        assert!(welch_ttest(&[1.0, 1.0, 1.0], &[2.0, 3.0, 5.0]).is_ok());
    }

    #[test]
    fn pooled_equals_welch_for_equal_shapes() {
        let a = [1.0, 2.0, 4.0, 7.0];
        let b: Vec<f64> = a.iter().map(|v| 10.0 - v).collect();
        let (w, p) = (welch_ttest(&a, &b).unwrap(), pooled_ttest(&a, &b).unwrap());
        assert!((w.t_statistic - p.t_statistic).abs() < 1e-12);
        assert!((w.degrees_of_freedom - p.degrees_of_freedom).abs() < 1e-12);
    }

    #[test]
    fn p_decreases_with_t() {
        for df in [1.0, 3.0, 12.0, 60.0] {
            let ps: Vec<f64> = (0..200)
                .map(|i| student_t_two_sided(i as f64 * 0.05, df).unwrap())
                .collect();
            assert!(ps.windows(2).all(|w| w[1] < w[0]), "df = {df}");
        }
    }

    #[test]
    fn period_pairs() {
        let counts = vec![
            ("before".to_string(), vec![1.0, 2.0, 3.0]),
            ("during".to_string(), vec![5.0, 6.0, 8.0]),
            ("after".to_string(), vec![1.0, 2.0, 3.0]),
        ];
        let r = compare_periods(&counts).unwrap();
        let pairs: Vec<_> = r.iter().map(TTestResult::label).collect();
        assert_eq!(
            pairs,
            ["before vs during", "before vs after", "during vs after"]
        );
        assert_eq!(r[1].p_value, 1.0);
        assert!(compare_periods(&counts[..1]).is_err());
        assert!(ttests_csv(&r).starts_with("pair,t_statistic,df,p_value\nbefore vs during,"));
    }
}
