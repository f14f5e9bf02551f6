//! Hypothesis tests on Bernoulli streams: betting capital processes and
//! fixed-sample concentration bounds, plus Monte Carlo checks of their error
//! rates.

mod betting;
mod fixed;

pub use betting::{anytime_test, BettingKind, BettingState};
pub use fixed::{fixed_sample_test, margin, FixedKind};

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::seed::rng_for;

/// Every estimator selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestKind {
    #[serde(rename = "betting-iid")]
    LowerIid,
    #[serde(rename = "betting-upper")]
    UpperIid,
    #[serde(rename = "betting-wr")]
    LowerWr,
    #[serde(rename = "hoeffding")]
    Hoeffding,
    #[serde(rename = "chernoff")]
    Chernoff,
}

impl TestKind {
    pub const ALL: [TestKind; 5] = [
        TestKind::LowerIid,
        TestKind::UpperIid,
        TestKind::LowerWr,
        TestKind::Hoeffding,
        TestKind::Chernoff,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TestKind::LowerIid => "betting-iid",
            TestKind::UpperIid => "betting-upper",
            TestKind::LowerWr => "betting-wr",
            TestKind::Hoeffding => "hoeffding",
            TestKind::Chernoff => "chernoff",
        }
    }

    pub fn betting(self) -> Option<BettingKind> {
        match self {
            TestKind::LowerIid => Some(BettingKind::LowerIid),
            TestKind::UpperIid => Some(BettingKind::UpperIid),
            TestKind::LowerWr => Some(BettingKind::LowerWr),
            _ => None,
        }
    }

    pub fn fixed(self) -> Option<FixedKind> {
        match self {
            TestKind::Hoeffding => Some(FixedKind::Hoeffding),
            TestKind::Chernoff => Some(FixedKind::Chernoff),
            _ => None,
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = TestKind::ALL.iter().map(|k| k.as_str()).collect();
                Error::Config(format!(
                    "unknown estimator {s:?}; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// A test fed one observation at a time.
pub trait MeanTest {
    /// Adds an observation; returns true once the test has accepted for good.
    /// Fixed-sample tests never accept early and return false here.
    fn observe(&mut self, y: bool) -> Result<bool>;
    /// Verdict on everything observed so far.
    fn accepts(&self) -> bool;
    fn observations(&self) -> usize;
}

impl MeanTest for BettingState {
    fn observe(&mut self, y: bool) -> Result<bool> {
        self.step(y)
    }

    fn accepts(&self) -> bool {
        self.fired()
    }

    fn observations(&self) -> usize {
        self.steps()
    }
}

/// Hoeffding or Chernoff test evaluated on the running totals.
#[derive(Debug, Clone)]
pub struct FixedSampleTest {
    kind: FixedKind,
    target: f64,
    alpha: f64,
    positives: usize,
    total: usize,
}

impl FixedSampleTest {
    pub fn new(kind: FixedKind, target: f64, alpha: f64) -> Self {
        Self {
            kind,
            target,
            alpha,
            positives: 0,
            total: 0,
        }
    }
}

impl MeanTest for FixedSampleTest {
    fn observe(&mut self, y: bool) -> Result<bool> {
        self.total += 1;
        self.positives += usize::from(y);
        Ok(false)
    }

    fn accepts(&self) -> bool {
        fixed_sample_test(
            self.kind,
            self.positives,
            self.total,
            self.target,
            self.alpha,
        )
        .unwrap_or(false)
    }

    fn observations(&self) -> usize {
        self.total
    }
}

/// Builds a fresh test of `kind` for target `m` at level `alpha`.
pub fn start_test(
    kind: TestKind,
    m: f64,
    alpha: f64,
    population: Option<usize>,
) -> Result<Box<dyn MeanTest + Send>> {
    match (kind.betting(), kind.fixed()) {
        (Some(b), _) => Ok(Box::new(BettingState::new(b, m, alpha, population)?)),
        (_, Some(f)) => Ok(Box::new(FixedSampleTest::new(f, m, alpha))),
        _ => unreachable!("every kind is betting or fixed"),
    }
}

fn accepts_stream(kind: TestKind, stream: &[bool], m: f64, alpha: f64) -> Result<bool> {
    let mut test = start_test(kind, m, alpha, Some(stream.len()))?;
    for &y in stream {
        if test.observe(y)? {
            return Ok(true);
        }
    }
    Ok(test.accepts())
}

/// Largest target the estimator certifies on `stream`, found by bisection to
/// within `resolution`. An empty stream supports nothing and yields 0.
pub fn max_supported_target(
    stream: &[bool],
    kind: TestKind,
    alpha: f64,
    resolution: f64,
) -> Result<f64> {
    if resolution.is_nan() || resolution <= 0.0 {
        return Err(param("resolution must be positive"));
    }
    if kind == TestKind::UpperIid {
        return Err(param("the upper test certifies upper bounds, not targets"));
    }
    if stream.is_empty() {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > resolution {
        let mid = 0.5 * (lo + hi);
        if accepts_stream(kind, stream, mid, alpha)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Fraction of `trials` seeded Bernoulli(`mu`) streams of length `horizon` on
/// which the test rejects its null.
///
/// Betting tests count a rejection at any step. Fixed-sample tests are applied
/// once to the full stream. The without-replacement test runs on a shuffled
/// population of `horizon` records holding `round(mu * horizon)` ones.
pub fn mc_false_positive_rate(
    kind: TestKind,
    mu: f64,
    m: f64,
    alpha: f64,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(param(format!("mu={mu} must lie in [0, 1]")));
    }
    if trials == 0 || horizon == 0 {
        return Err(param("trials and horizon must be positive"));
    }
    start_test(kind, m, alpha, Some(horizon))?;
    let fired = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<bool> {
            let mut rng = rng_for(seed, t as u64);
            let stream: Vec<bool> = if kind == TestKind::LowerWr {
                let ones = (mu * horizon as f64).round() as usize;
                let mut pop: Vec<bool> = (0..horizon).map(|i| i < ones).collect();
                pop.shuffle(&mut rng);
                pop
            } else {
                (0..horizon).map(|_| rng.random_bool(mu)).collect()
            };
            accepts_stream(kind, &stream, m, alpha)
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(fired.iter().filter(|&&f| f).count() as f64 / trials as f64)
}

/// Monte Carlo variance of the mean of `k` Bernoulli(`p`) draws, over `draws`
/// repetitions.
pub fn sample_mean_variance(p: f64, k: usize, draws: usize, seed: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || k == 0 || draws < 2 {
        return Err(param("need p in [0, 1], k >= 1 and at least two draws"));
    }
    let means: Vec<f64> = (0..draws)
        .map(|d| {
            let mut rng = rng_for(seed, d as u64);
            (0..k).filter(|_| rng.random_bool(p)).count() as f64 / k as f64
        })
        .collect();
    let avg = means.iter().sum::<f64>() / draws as f64;
    Ok(means.iter().map(|x| (x - avg).powi(2)).sum::<f64>() / (draws - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_roundtrip() {
        for k in TestKind::ALL {
            assert_eq!(k.as_str().parse::<TestKind>().unwrap(), k);
            assert_eq!(
                serde_json::to_string(&k).unwrap(),
                format!("\"{}\"", k.as_str())
            );
        }
        assert!("bogus".parse::<TestKind>().is_err());
    }

    #[test]
    fn sharpness_on_all_ones() {
        let ones = vec![true; 50];
        let h = max_supported_target(&ones, TestKind::Hoeffding, 0.1, 1e-5).unwrap();
        assert!((h - (1.0 - (10f64.ln() / 100.0).sqrt())).abs() < 1e-4);
        let b = max_supported_target(&ones, TestKind::LowerIid, 0.1, 1e-5).unwrap();
        // closed form while the cap binds: 50 ln(1 + 0.75 (1-T)/T) = ln 10
        let t_star = 0.75 / ((10f64.ln() / 50.0).exp() - 1.0 + 0.75);
        assert!((b - t_star).abs() < 2e-3, "{b} vs {t_star}");
        assert!((b - 0.9409).abs() < 2e-3);
        assert!(b > h);
        assert_eq!(
            max_supported_target(&[], TestKind::LowerIid, 0.1, 1e-4).unwrap(),
            0.0
        );
    }

    #[test]
    fn bisection_predicate_is_monotone() {
        for s in 0..100u64 {
            let mut rng = rng_for(99, s);
            let p = rng.random::<f64>();
            let stream: Vec<bool> = (0..200).map(|_| rng.random_bool(p)).collect();
            for kind in [TestKind::LowerIid, TestKind::Hoeffding, TestKind::Chernoff] {
                let mut prev = true;
                for t in 1..50 {
                    let now = accepts_stream(kind, &stream, t as f64 / 50.0, 0.1).unwrap();
                    assert!(prev || !now, "{kind} seed {s} at {t}");
                    prev = now;
                }
            }
        }
    }

    #[test]
    fn false_positive_rates_are_bounded() {
        let bound = 0.1 + 3.0 * (0.1f64 * 0.9 / 500.0).sqrt();
        for kind in [
            TestKind::LowerIid,
            TestKind::LowerWr,
            TestKind::Hoeffding,
            TestKind::Chernoff,
        ] {
            let rate = mc_false_positive_rate(kind, 0.85, 0.9, 0.1, 1000, 500, 3).unwrap();
            assert!(rate <= bound, "{kind}: {rate}");
            assert_eq!(
                mc_false_positive_rate(kind, 0.0, 0.9, 0.1, 200, 100, 3).unwrap(),
                0.0
            );
        }
        let rate =
            mc_false_positive_rate(TestKind::UpperIid, 0.95, 0.9, 0.1, 1000, 500, 3).unwrap();
        assert!(rate <= bound);
    }

    #[test]
    fn mc_rate_is_deterministic_and_has_power() {
        let a = mc_false_positive_rate(TestKind::LowerIid, 0.95, 0.9, 0.1, 1000, 200, 8).unwrap();
        let b = mc_false_positive_rate(TestKind::LowerIid, 0.95, 0.9, 0.1, 1000, 200, 8).unwrap();
        assert_eq!(a, b);
        assert!(a > 0.5);
    }

    #[test]
    fn variance_identity() {
        for p in [0.5, 0.9, 0.99] {
            let v = sample_mean_variance(p, 50, 5000, 4).unwrap();
            let expected = p * (1.0 - p) / 50.0;
            assert!(
                (v - expected).abs() <= 0.2 * expected,
                "p={p}: {v} vs {expected}"
            );
        }
    }
}
